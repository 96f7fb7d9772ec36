#pragma once

// Exact partial derivatives by forward accumulation over the DAG.

#include <unordered_map>
#include <vector>

#include "amdyn/symx/graph.hpp"

namespace amdyn::symx {

/// Memoizing differentiator for one symbol; reuse it across roots to share work.
class Differentiator {
 public:
  Differentiator(ExprGraph& g, NodeId symbol) : g_(g), sym_(symbol) {
    if (g.node(symbol).op != Op::Symbol) throw LookupError("derivative variable is not a symbol");
  }

  NodeId operator()(NodeId root) {
    // Post-order walk that stops at nodes already differentiated.
    std::vector<std::pair<NodeId, int>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [id, child] = stack.back();
      if (memo_.count(id)) {
        stack.pop_back();
        continue;
      }
      const Node& n = g_.node(id);
      const int arity = is_leaf(n.op) ? 0 : (is_unary(n.op) ? 1 : 2);
      if (child < arity) {
        const NodeId c = child++ == 0 ? n.a : n.b;
        if (!memo_.count(c)) stack.push_back({c, 0});
        continue;
      }
      const NodeId done = id;
      stack.pop_back();
      memo_.emplace(done, rule(done));
    }
    return memo_.at(root);
  }

 private:
  NodeId d(NodeId id) const { return memo_.at(id); }

  NodeId rule(NodeId id) {
    const Node n = g_.node(id);  // copy: the arena may grow below
    switch (n.op) {
      case Op::Const: return g_.zero();
      case Op::Symbol: return id == sym_ ? g_.one() : g_.zero();
      case Op::Add: return g_.add(d(n.a), d(n.b));
      case Op::Mul: return g_.add(g_.mul(d(n.a), n.b), g_.mul(n.a, d(n.b)));
      case Op::Neg: return g_.neg(d(n.a));
      case Op::PowInt:
        return g_.mul(g_.mul(g_.constant(n.k), g_.powi(n.a, n.k - 1)), d(n.a));
      case Op::Sin: return g_.mul(g_.cos(n.a), d(n.a));
      case Op::Cos: return g_.neg(g_.mul(g_.sin(n.a), d(n.a)));
      case Op::Sqrt: return g_.div(d(n.a), g_.mul(g_.constant(2.0), id));
      case Op::Div: {
        // (a/b)' = a'/b − (a/b)·b'/b
        const NodeId da = d(n.a), db = d(n.b);
        return g_.sub(g_.div(da, n.b), g_.div(g_.mul(id, db), n.b));
      }
    }
    return g_.zero();
  }

  ExprGraph& g_;
  NodeId sym_;
  std::unordered_map<NodeId, NodeId> memo_;
};

inline NodeId differentiate(ExprGraph& g, NodeId root, NodeId symbol) { return Differentiator(g, symbol)(root); }

inline Expr differentiate(const Expr& f, const Expr& symbol) {
  return Expr::from_id(differentiate(active(), f.id(), symbol.id()));
}

}  // namespace amdyn::symx
