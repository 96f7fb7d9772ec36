#pragma once

// Hash-consed scalar expression DAG. `Expr` is a handle into the graph that is
// active on the current thread, so Eigen matrices of Expr can run through the
// same templated kinematics and dynamics code as double.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "amdyn/common.hpp"

namespace amdyn::symx {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t { Const, Symbol, Add, Mul, Neg, PowInt, Sin, Cos, Sqrt, Div };

inline const char* to_string(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Symbol: return "symbol";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Neg: return "neg";
    case Op::PowInt: return "pow";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sqrt: return "sqrt";
    case Op::Div: return "div";
  }
  return "?";
}

inline bool is_leaf(Op op) { return op == Op::Const || op == Op::Symbol; }
inline bool is_unary(Op op) { return op == Op::Neg || op == Op::PowInt || op == Op::Sin || op == Op::Cos || op == Op::Sqrt; }

struct Node {
  Op op = Op::Const;
  NodeId a = 0;
  NodeId b = 0;
  double value = 0.0;  // constant value
  int k = 0;           // exponent for PowInt, symbol index for Symbol
};

constexpr std::size_t kDefaultNodeBudget = 10'000'000;

/// Append-only arena with structural hashing: building the same subtree twice yields the same id.
class ExprGraph {
 public:
  explicit ExprGraph(std::size_t budget = kDefaultNodeBudget) : budget_(budget) {
    zero_ = constant(0.0);
    one_ = constant(1.0);
  }
  ExprGraph(const ExprGraph&) = delete;
  ExprGraph& operator=(const ExprGraph&) = delete;

  std::size_t size() const { return nodes_.size(); }
  std::size_t budget() const { return budget_; }
  void set_budget(std::size_t b) { budget_ = b; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  NodeId zero() const { return zero_; }
  NodeId one() const { return one_; }

  bool is_const(NodeId id) const { return nodes_[id].op == Op::Const; }
  bool is_const(NodeId id, double v) const { return is_const(id) && nodes_[id].value == v; }

  NodeId constant(double v) {
    if (v == 0.0) v = 0.0;  // fold -0
    Node n;
    n.op = Op::Const;
    n.value = v;
    return intern(n);
  }

  /// Registers (or returns) the symbol called `name`.
  NodeId symbol(const std::string& name) {
    auto it = symbol_ids_.find(name);
    if (it != symbol_ids_.end()) return it->second;
    Node n;
    n.op = Op::Symbol;
    n.k = static_cast<int>(symbol_names_.size());
    symbol_names_.push_back(name);
    const NodeId id = push(n);
    symbol_ids_.emplace(name, id);
    symbol_nodes_.push_back(id);
    return id;
  }

  std::size_t num_symbols() const { return symbol_names_.size(); }
  const std::string& symbol_name(int index) const { return symbol_names_.at(static_cast<std::size_t>(index)); }
  NodeId symbol_node(int index) const { return symbol_nodes_.at(static_cast<std::size_t>(index)); }
  bool has_symbol(const std::string& name) const { return symbol_ids_.count(name) > 0; }
  NodeId find_symbol(const std::string& name) const {
    auto it = symbol_ids_.find(name);
    if (it == symbol_ids_.end()) throw LookupError("unknown symbol '" + name + "'");
    return it->second;
  }

  NodeId add(NodeId a, NodeId b) {
    if (is_const(a) && is_const(b)) return constant(nodes_[a].value + nodes_[b].value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    if (a > b) std::swap(a, b);
    return make(Op::Add, a, b);
  }

  NodeId sub(NodeId a, NodeId b) { return add(a, neg(b)); }

  NodeId mul(NodeId a, NodeId b) {
    if (is_const(a) && is_const(b)) return constant(nodes_[a].value * nodes_[b].value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return zero_;
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a, -1.0)) return neg(b);
    if (is_const(b, -1.0)) return neg(a);
    if (a > b) std::swap(a, b);
    return make(Op::Mul, a, b);
  }

  NodeId neg(NodeId a) {
    if (is_const(a)) return constant(-nodes_[a].value);
    if (nodes_[a].op == Op::Neg) return nodes_[a].a;
    return make(Op::Neg, a, 0);
  }

  NodeId div(NodeId a, NodeId b) {
    if (is_const(b, 0.0)) throw DomainError("symbolic division by zero");
    if (is_const(a) && is_const(b)) return constant(nodes_[a].value / nodes_[b].value);
    if (is_const(a, 0.0)) return zero_;
    if (is_const(b, 1.0)) return a;
    return make(Op::Div, a, b);
  }

  NodeId powi(NodeId a, int k) {
    if (k < 0) throw DomainError("negative integer power");
    if (k == 0) return one_;
    if (k == 1) return a;
    if (is_const(a)) return constant(std::pow(nodes_[a].value, k));
    Node n;
    n.op = Op::PowInt;
    n.a = a;
    n.k = k;
    return intern(n);
  }

  NodeId sin(NodeId a) {
    if (is_const(a)) return constant(std::sin(nodes_[a].value));
    return make(Op::Sin, a, 0);
  }
  NodeId cos(NodeId a) {
    if (is_const(a)) return constant(std::cos(nodes_[a].value));
    return make(Op::Cos, a, 0);
  }
  NodeId sqrt(NodeId a) {
    if (is_const(a)) return constant(std::sqrt(nodes_[a].value));
    return make(Op::Sqrt, a, 0);
  }

  /// Ids reachable from `roots`, children before parents, in deterministic DFS order.
  std::vector<NodeId> topological(const std::vector<NodeId>& roots) const {
    std::vector<NodeId> order;
    std::vector<std::uint8_t> state(nodes_.size(), 0);
    std::vector<std::pair<NodeId, int>> stack;
    for (NodeId r : roots) {
      if (state[r]) continue;
      stack.push_back({r, 0});
      while (!stack.empty()) {
        auto& [id, child] = stack.back();
        const Node& n = nodes_[id];
        const int arity = is_leaf(n.op) ? 0 : (is_unary(n.op) ? 1 : 2);
        if (child < arity) {
          const NodeId c = child == 0 ? n.a : n.b;
          ++child;
          if (!state[c]) {
            state[c] = 1;
            stack.push_back({c, 0});
          }
          continue;
        }
        state[id] = 2;
        order.push_back(id);
        stack.pop_back();
      }
    }
    return order;
  }

 private:
  struct Key {
    Op op;
    NodeId a, b;
    std::uint64_t bits;
    bool operator==(const Key& o) const { return op == o.op && a == o.a && b == o.b && bits == o.bits; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(k.op) + 1);
      h ^= (static_cast<std::uint64_t>(k.a) << 32 | k.b) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= k.bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };

  static Key key_of(const Node& n) {
    std::uint64_t bits = 0;
    if (n.op == Op::Const) std::memcpy(&bits, &n.value, sizeof bits);
    else bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(n.k));
    return {n.op, n.a, n.b, bits};
  }

  NodeId make(Op op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    return intern(n);
  }

  NodeId intern(const Node& n) {
    const Key k = key_of(n);
    auto it = index_.find(k);
    if (it != index_.end()) return it->second;
    const NodeId id = push(n);
    index_.emplace(k, id);
    return id;
  }

  NodeId push(const Node& n) {
    if (nodes_.size() >= budget_)
      throw BudgetError("expression graph exceeds the node budget of " + std::to_string(budget_) + " nodes");
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::size_t budget_;
  std::vector<Node> nodes_;
  std::unordered_map<Key, NodeId, KeyHash> index_;
  std::unordered_map<std::string, NodeId> symbol_ids_;
  std::vector<std::string> symbol_names_;
  std::vector<NodeId> symbol_nodes_;
  NodeId zero_ = 0, one_ = 0;
};

namespace detail {
inline ExprGraph*& active_graph() {
  thread_local ExprGraph* g = nullptr;
  return g;
}
}  // namespace detail

/// Makes `g` the graph that Expr arithmetic on this thread writes into.
class GraphScope {
 public:
  explicit GraphScope(ExprGraph& g) : prev_(detail::active_graph()) { detail::active_graph() = &g; }
  ~GraphScope() { detail::active_graph() = prev_; }
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  ExprGraph* prev_;
};

inline ExprGraph& active() {
  ExprGraph* g = detail::active_graph();
  if (!g) throw Error("no active expression graph; open a GraphScope first");
  return *g;
}

/// Scalar handle for use inside Eigen matrices.
class Expr {
 public:
  Expr() : id_(active().zero()) {}
  Expr(double v) : id_(active().constant(v)) {}  // NOLINT(implicit)
  Expr(int v) : id_(active().constant(v)) {}     // NOLINT(implicit)
  static Expr from_id(NodeId id) {
    Expr e(0.0);
    e.id_ = id;
    return e;
  }
  static Expr symbol(const std::string& name) { return from_id(active().symbol(name)); }

  NodeId id() const { return id_; }

  Expr& operator+=(const Expr& o) { return *this = *this + o; }
  Expr& operator-=(const Expr& o) { return *this = *this - o; }
  Expr& operator*=(const Expr& o) { return *this = *this * o; }
  Expr& operator/=(const Expr& o) { return *this = *this / o; }

  friend Expr operator+(const Expr& a, const Expr& b) { return from_id(active().add(a.id_, b.id_)); }
  friend Expr operator-(const Expr& a, const Expr& b) { return from_id(active().sub(a.id_, b.id_)); }
  friend Expr operator*(const Expr& a, const Expr& b) { return from_id(active().mul(a.id_, b.id_)); }
  friend Expr operator/(const Expr& a, const Expr& b) { return from_id(active().div(a.id_, b.id_)); }
  friend Expr operator-(const Expr& a) { return from_id(active().neg(a.id_)); }
  friend Expr operator+(const Expr& a) { return a; }

  /// Structural identity, not numeric comparison.
  friend bool operator==(const Expr& a, const Expr& b) { return a.id_ == b.id_; }
  friend bool operator!=(const Expr& a, const Expr& b) { return a.id_ != b.id_; }

 private:
  NodeId id_;
};

inline Expr sin(const Expr& x) { return Expr::from_id(active().sin(x.id())); }
inline Expr cos(const Expr& x) { return Expr::from_id(active().cos(x.id())); }
inline Expr sqrt(const Expr& x) { return Expr::from_id(active().sqrt(x.id())); }
inline Expr powi(const Expr& x, int k) { return Expr::from_id(active().powi(x.id(), k)); }

inline std::vector<NodeId> ids(const std::vector<Expr>& v) {
  std::vector<NodeId> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(e.id());
  return out;
}

/// Column-major ids of a matrix of Expr.
template <class Derived>
std::vector<NodeId> ids(const Eigen::MatrixBase<Derived>& m) {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m(i, j).id());
  return out;
}

/// Direct recursive-free evaluation of `roots` with symbol values indexed by symbol number.
inline std::vector<double> evaluate(const ExprGraph& g, const std::vector<NodeId>& roots, const std::vector<double>& symbols) {
  if (symbols.size() < g.num_symbols()) throw DimensionError("too few symbol values");
  const auto order = g.topological(roots);
  std::unordered_map<NodeId, double> val;
  val.reserve(order.size());
  for (NodeId id : order) {
    const Node& n = g.node(id);
    double v = 0.0;
    switch (n.op) {
      case Op::Const: v = n.value; break;
      case Op::Symbol: v = symbols[static_cast<std::size_t>(n.k)]; break;
      case Op::Add: v = val[n.a] + val[n.b]; break;
      case Op::Mul: v = val[n.a] * val[n.b]; break;
      case Op::Neg: v = -val[n.a]; break;
      case Op::PowInt: {
        const double base = val[n.a];
        v = base;
        for (int i = 1; i < n.k; ++i) v = v * base;
        break;
      }
      case Op::Sin: v = std::sin(val[n.a]); break;
      case Op::Cos: v = std::cos(val[n.a]); break;
      case Op::Sqrt: v = std::sqrt(val[n.a]); break;
      case Op::Div: v = val[n.a] / val[n.b]; break;
    }
    val[id] = v;
  }
  std::vector<double> out;
  out.reserve(roots.size());
  for (NodeId r : roots) out.push_back(val[r]);
  return out;
}

/// Infix rendering with symbol names, for diagnostics and canonical ordering of small expressions.
inline std::string print(const ExprGraph& g, NodeId id) {
  const Node& n = g.node(id);
  auto p = [&](NodeId k) { return print(g, k); };
  switch (n.op) {
    case Op::Const: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      return buf;
    }
    case Op::Symbol: return g.symbol_name(n.k);
    case Op::Add: return "(" + p(n.a) + " + " + p(n.b) + ")";
    case Op::Mul: return "(" + p(n.a) + "*" + p(n.b) + ")";
    case Op::Div: return "(" + p(n.a) + "/" + p(n.b) + ")";
    case Op::Neg: return "(-" + p(n.a) + ")";
    case Op::PowInt: return p(n.a) + "^" + std::to_string(n.k);
    case Op::Sin: return "sin(" + p(n.a) + ")";
    case Op::Cos: return "cos(" + p(n.a) + ")";
    case Op::Sqrt: return "sqrt(" + p(n.a) + ")";
  }
  return "?";
}

}  // namespace amdyn::symx

namespace Eigen {

template <>
struct NumTraits<amdyn::symx::Expr> : NumTraits<double> {
  using Real = amdyn::symx::Expr;
  using NonInteger = amdyn::symx::Expr;
  using Nested = amdyn::symx::Expr;
  using Literal = amdyn::symx::Expr;
  enum { IsComplex = 0, IsInteger = 0, IsSigned = 1, RequireInitialization = 1, ReadCost = 1, AddCost = 1, MulCost = 1 };
};

}  // namespace Eigen
