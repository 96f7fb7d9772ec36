#pragma once

// Common-subexpression assignment lists, operation counts, a tape evaluator
// and C89 straight-line emission. Hash-consing already merged identical
// subtrees, so CSE here only decides which shared nodes become temporaries.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "amdyn/symx/graph.hpp"

namespace amdyn::symx {

struct OpCounts {
  std::size_t add = 0, mul = 0, div = 0, neg = 0, pow = 0, trig = 0, sqrt = 0;
  std::size_t total() const { return add + mul + div + neg + pow + trig + sqrt; }
};

/// Distinct operation nodes reachable from `roots`, one op each (pow-int and trig included).
inline OpCounts count_ops(const ExprGraph& g, const std::vector<NodeId>& roots) {
  OpCounts c;
  for (NodeId id : g.topological(roots)) {
    switch (g.node(id).op) {
      case Op::Const:
      case Op::Symbol: break;
      case Op::Add: ++c.add; break;
      case Op::Mul: ++c.mul; break;
      case Op::Div: ++c.div; break;
      case Op::Neg: ++c.neg; break;
      case Op::PowInt: ++c.pow; break;
      case Op::Sin:
      case Op::Cos: ++c.trig; break;
      case Op::Sqrt: ++c.sqrt; break;
    }
  }
  return c;
}

/// Temporaries in evaluation order plus the roots they feed.
struct CseResult {
  std::vector<NodeId> roots;
  std::vector<NodeId> temps;
  std::unordered_map<NodeId, std::size_t> temp_index;
  bool is_temp(NodeId id) const { return temp_index.count(id) > 0; }
};

/// Shared operation nodes, pow-int bases and nodes nested deeper than `max_depth` become temporaries.
inline CseResult cse(const ExprGraph& g, const std::vector<NodeId>& roots, int max_depth = 24) {
  const auto order = g.topological(roots);
  std::unordered_map<NodeId, int> uses;
  for (NodeId id : order) {
    const Node& n = g.node(id);
    if (is_leaf(n.op)) continue;
    ++uses[n.a];
    if (n.op == Op::PowInt) uses[n.a] += 2;  // the base is read repeatedly
    if (!is_unary(n.op)) ++uses[n.b];
  }
  CseResult r;
  r.roots = roots;
  std::unordered_map<NodeId, int> depth;
  for (NodeId id : order) {
    const Node& n = g.node(id);
    if (is_leaf(n.op)) {
      depth[id] = 0;
      continue;
    }
    int d = 1 + depth[n.a];
    if (!is_unary(n.op)) d = std::max(d, 1 + depth[n.b]);
    if (uses[id] > 1 || d > max_depth) {
      r.temp_index.emplace(id, r.temps.size());
      r.temps.push_back(id);
      d = 0;
    }
    depth[id] = d;
  }
  return r;
}

/// C double literal that round-trips.
inline std::string c_literal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  if (v < 0.0) s = "(" + s + ")";
  return s;
}

namespace detail {

inline std::string render(const ExprGraph& g, const CseResult& c, NodeId id, bool top, const std::string& input) {
  if (!top) {
    auto it = c.temp_index.find(id);
    if (it != c.temp_index.end()) return "t" + std::to_string(it->second);
  }
  const Node& n = g.node(id);
  auto sub = [&](NodeId k) { return render(g, c, k, false, input); };
  switch (n.op) {
    case Op::Const: return c_literal(n.value);
    case Op::Symbol: return input + "[" + std::to_string(n.k) + "]";
    case Op::Add: return "(" + sub(n.a) + " + " + sub(n.b) + ")";
    case Op::Mul: return "(" + sub(n.a) + " * " + sub(n.b) + ")";
    case Op::Div: return "(" + sub(n.a) + " / " + sub(n.b) + ")";
    case Op::Neg: return "(-" + sub(n.a) + ")";
    case Op::PowInt: {
      const std::string b = sub(n.a);
      std::string s = "(" + b;
      for (int i = 1; i < n.k; ++i) s += " * " + b;
      return s + ")";
    }
    case Op::Sin: return "sin(" + sub(n.a) + ")";
    case Op::Cos: return "cos(" + sub(n.a) + ")";
    case Op::Sqrt: return "sqrt(" + sub(n.a) + ")";
  }
  return "0.0";
}

}  // namespace detail

/// `void name(const double *in, double *out)` with in[k] the value of symbol k and
/// out the roots in order (column-major when the roots are a matrix).
inline std::string emit_code(const ExprGraph& g, const CseResult& c, const std::string& name) {
  std::ostringstream os;
  os << "void " << name << "(const double *in, double *out)\n{\n";
  for (std::size_t i = 0; i < c.temps.size(); ++i)
    os << "  const double t" << i << " = " << detail::render(g, c, c.temps[i], true, "in") << ";\n";
  os << "  (void)in;\n";
  if (c.roots.empty()) os << "  (void)out;\n";
  for (std::size_t i = 0; i < c.roots.size(); ++i)
    os << "  out[" << i << "] = " << detail::render(g, c, c.roots[i], false, "in") << ";\n";
  os << "}\n";
  return os.str();
}

/// Prototype line for an emitted function.
inline std::string emit_prototype(const std::string& name) {
  return "void " + name + "(const double *in, double *out);\n";
}

/// Straight-line interpreter over the same operation sequence the emitted C performs.
class Tape {
 public:
  Tape(const ExprGraph& g, const std::vector<NodeId>& roots) {
    const auto order = g.topological(roots);
    std::unordered_map<NodeId, std::uint32_t> slot;
    slot.reserve(order.size());
    for (NodeId id : order) {
      const Node& n = g.node(id);
      Instr in{n.op, 0, 0, n.k, n.value};
      if (!is_leaf(n.op)) {
        in.a = slot.at(n.a);
        if (!is_unary(n.op)) in.b = slot.at(n.b);
      }
      if (n.op == Op::Symbol) num_inputs_ = std::max<std::size_t>(num_inputs_, static_cast<std::size_t>(n.k) + 1);
      slot.emplace(id, static_cast<std::uint32_t>(code_.size()));
      code_.push_back(in);
    }
    for (NodeId r : roots) outputs_.push_back(slot.at(r));
    regs_.resize(code_.size());
  }

  std::size_t num_inputs() const { return num_inputs_; }
  std::size_t num_outputs() const { return outputs_.size(); }
  std::size_t size() const { return code_.size(); }

  void evaluate(const double* in, double* out) {
    double* r = regs_.data();
    for (std::size_t i = 0; i < code_.size(); ++i) {
      const Instr& c = code_[i];
      switch (c.op) {
        case Op::Const: r[i] = c.value; break;
        case Op::Symbol: r[i] = in[c.k]; break;
        case Op::Add: r[i] = r[c.a] + r[c.b]; break;
        case Op::Mul: r[i] = r[c.a] * r[c.b]; break;
        case Op::Div: r[i] = r[c.a] / r[c.b]; break;
        case Op::Neg: r[i] = -r[c.a]; break;
        case Op::PowInt: {
          double v = r[c.a];
          for (int k = 1; k < c.k; ++k) v = v * r[c.a];
          r[i] = v;
          break;
        }
        case Op::Sin: r[i] = std::sin(r[c.a]); break;
        case Op::Cos: r[i] = std::cos(r[c.a]); break;
        case Op::Sqrt: r[i] = std::sqrt(r[c.a]); break;
      }
    }
    for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = r[outputs_[k]];
  }

  std::vector<double> evaluate(const std::vector<double>& in) {
    if (in.size() < num_inputs_) throw DimensionError("tape needs " + std::to_string(num_inputs_) + " inputs");
    std::vector<double> out(outputs_.size());
    evaluate(in.data(), out.data());
    return out;
  }

 private:
  struct Instr {
    Op op;
    std::uint32_t a, b;
    int k;
    double value;
  };
  std::vector<Instr> code_;
  std::vector<std::uint32_t> outputs_;
  std::vector<double> regs_;
  std::size_t num_inputs_ = 0;
};

}  // namespace amdyn::symx
