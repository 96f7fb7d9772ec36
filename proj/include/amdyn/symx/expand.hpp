#pragma once

// Distributes products over sums: every root becomes a sum of
// coefficient · Π atom^k, where atoms are symbols and the transcendental
// nodes sin, cos, sqrt and 1/b (with expanded arguments).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include "amdyn/symx/graph.hpp"

namespace amdyn::symx {

/// Exponent vector of up to 48 atoms, 4 bits per exponent.
struct Monomial {
  static constexpr int kWords = 3;
  static constexpr int kMaxAtoms = 16 * kWords;
  static constexpr int kMaxExponent = 15;
  std::array<std::uint64_t, kWords> w{};

  bool operator==(const Monomial& o) const { return w == o.w; }
  bool operator<(const Monomial& o) const { return w < o.w; }

  int exponent(int atom) const { return static_cast<int>((w[atom / 16] >> (4 * (atom % 16))) & 0xF); }

  static Monomial atom(int index) {
    Monomial m;
    m.w[static_cast<std::size_t>(index / 16)] = std::uint64_t{1} << (4 * (index % 16));
    return m;
  }

  /// Exponent-wise sum; throws BudgetError when an exponent would exceed 15.
  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    constexpr std::uint64_t lo = 0x0F0F0F0F0F0F0F0FULL;
    Monomial r;
    for (int i = 0; i < kWords; ++i) {
      const std::uint64_t even = (a.w[i] & lo) + (b.w[i] & lo);
      const std::uint64_t odd = ((a.w[i] >> 4) & lo) + ((b.w[i] >> 4) & lo);
      if ((even | odd) & ~lo) throw BudgetError("monomial exponent exceeds 15");
      r.w[i] = even | (odd << 4);
    }
    return r;
  }
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto x : m.w) {
      h ^= x;
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

using Poly = std::unordered_map<Monomial, double, MonomialHash>;

class Expander {
 public:
  explicit Expander(ExprGraph& g, std::size_t term_budget = kDefaultNodeBudget) : g_(g), budget_(term_budget) {}

  /// Expanded copies of `roots`, built into the same graph.
  std::vector<NodeId> operator()(const std::vector<NodeId>& roots) {
    std::vector<NodeId> out;
    out.reserve(roots.size());
    for (NodeId r : roots) {
      out.push_back(rebuild(poly_of(r)));
      forget(r);
    }
    return out;
  }

  Poly expand_poly(NodeId root) {
    Poly p = poly_of(root);
    forget(root);
    return p;
  }
  std::size_t num_atoms() const { return atoms_.size(); }
  NodeId atom_node(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }

  /// Sum of terms; factors and terms follow a canonical atom order (symbols by index, then
  /// transcendental atoms by their printed form) so equal polynomials rebuild identically.
  NodeId rebuild(const Poly& p) {
    const auto& order = canonical_order();
    using Key = std::vector<int>;
    std::vector<std::pair<Key, double>> terms;
    terms.reserve(p.size());
    for (const auto& [m, c] : p) {
      Key k(order.size());
      for (std::size_t r = 0; r < order.size(); ++r) k[r] = m.exponent(order[r]);
      terms.emplace_back(std::move(k), c);
    }
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    NodeId sum = g_.zero();
    for (const auto& [k, c] : terms) {
      NodeId prod = g_.one();
      for (std::size_t r = 0; r < order.size(); ++r)
        if (k[r]) prod = g_.mul(prod, g_.powi(atoms_[static_cast<std::size_t>(order[r])], k[r]));
      sum = g_.add(sum, g_.mul(g_.constant(c), prod));
    }
    return sum;
  }

 private:
  static Poly constant_poly(double c) {
    Poly p;
    if (c != 0.0) p.emplace(Monomial{}, c);
    return p;
  }

  static double max_abs(const Poly& p) {
    double big = 0.0;
    for (const auto& [m, c] : p) big = std::max(big, std::abs(c));
    return big;
  }

  /// Drops coefficients at the rounding level of `scale`, the magnitude of the operands that
  /// produced them; these are residue of exact cancellation.
  static void prune(Poly& p, double scale) {
    const double cut = 1e-13 * scale;
    for (auto it = p.begin(); it != p.end();) it = std::abs(it->second) <= cut ? p.erase(it) : std::next(it);
  }

  void charge(std::size_t terms) {
    live_ += terms;
    if (live_ > budget_)
      throw BudgetError("expansion exceeds the term budget of " + std::to_string(budget_) + " terms");
  }

  Poly atom_poly(NodeId node) {
    if (g_.is_const(node)) return constant_poly(g_.node(node).value);
    auto it = atom_index_.find(node);
    int idx;
    if (it != atom_index_.end()) {
      idx = it->second;
    } else {
      if (static_cast<int>(atoms_.size()) >= Monomial::kMaxAtoms)
        throw BudgetError("expansion needs more than " + std::to_string(Monomial::kMaxAtoms) + " atoms");
      idx = static_cast<int>(atoms_.size());
      atoms_.push_back(node);
      atom_index_.emplace(node, idx);
    }
    Poly p;
    p.emplace(Monomial::atom(idx), 1.0);
    return p;
  }

  static Poly sum(const Poly& a, const Poly& b, double sb = 1.0) {
    Poly r = a;
    for (const auto& [m, c] : b) r[m] += sb * c;
    prune(r, std::max(max_abs(a), std::abs(sb) * max_abs(b)));
    return r;
  }

  Poly product(const Poly& a, const Poly& b) {
    Poly r;
    r.reserve(a.size() * b.size() / 2 + 1);
    for (const auto& [ma, ca] : a)
      for (const auto& [mb, cb] : b) r[ma * mb] += ca * cb;
    prune(r, max_abs(a) * max_abs(b));
    return r;
  }

  Poly power(const Poly& a, int k) {
    Poly r = constant_poly(1.0);
    for (int i = 0; i < k; ++i) r = product(r, a);
    return r;
  }

  const Poly& poly_of(NodeId root) {
    // Children are expanded before parents; intermediates are released once all parents are done.
    const auto order = g_.topological({root});
    std::unordered_map<NodeId, int> uses;
    for (NodeId id : order) {
      if (memo_.count(id)) continue;
      const Node& n = g_.node(id);
      if (is_leaf(n.op)) continue;
      ++uses[n.a];
      if (!is_unary(n.op)) ++uses[n.b];
    }
    for (NodeId id : order) {
      if (memo_.count(id)) continue;
      const Node n = g_.node(id);
      Poly p;
      switch (n.op) {
        case Op::Const: p = constant_poly(n.value); break;
        case Op::Symbol: p = atom_poly(id); break;
        case Op::Add: p = sum(memo_.at(n.a), memo_.at(n.b)); break;
        case Op::Mul: p = product(memo_.at(n.a), memo_.at(n.b)); break;
        case Op::Neg: p = sum(Poly{}, memo_.at(n.a), -1.0); break;
        case Op::PowInt: p = power(memo_.at(n.a), n.k); break;
        case Op::Sin: p = atom_poly(g_.sin(rebuild(memo_.at(n.a)))); break;
        case Op::Cos: p = atom_poly(g_.cos(rebuild(memo_.at(n.a)))); break;
        case Op::Sqrt: p = atom_poly(g_.sqrt(rebuild(memo_.at(n.a)))); break;
        case Op::Div: {
          const Poly& den = memo_.at(n.b);
          if (den.size() == 1 && den.begin()->first == Monomial{}) {
            p = sum(Poly{}, memo_.at(n.a), 1.0 / den.begin()->second);
          } else {
            p = product(memo_.at(n.a), atom_poly(g_.div(g_.one(), rebuild(den))));
          }
          break;
        }
      }
      charge(p.size());
      memo_.emplace(id, std::move(p));
      if (!is_leaf(n.op)) {
        release(n.a, uses, root);
        if (!is_unary(n.op)) release(n.b, uses, root);
      }
    }
    return memo_.at(root);
  }

  void release(NodeId id, std::unordered_map<NodeId, int>& uses, NodeId root) {
    auto it = uses.find(id);
    if (it == uses.end() || --it->second > 0 || id == root) return;
    forget(id);
  }

  void forget(NodeId id) {
    auto m = memo_.find(id);
    if (m == memo_.end()) return;
    live_ -= std::min(live_, m->second.size());
    memo_.erase(m);
  }

  const std::vector<int>& canonical_order() {
    if (order_.size() == atoms_.size()) return order_;
    std::vector<std::pair<std::string, int>> keys;
    for (int i = 0; i < static_cast<int>(atoms_.size()); ++i) {
      const Node& n = g_.node(atoms_[static_cast<std::size_t>(i)]);
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08d", n.k);
      keys.emplace_back(n.op == Op::Symbol ? std::string("0") + buf : "1" + print(g_, atoms_[static_cast<std::size_t>(i)]), i);
    }
    std::sort(keys.begin(), keys.end());
    order_.clear();
    for (const auto& k : keys) order_.push_back(k.second);
    return order_;
  }

  ExprGraph& g_;
  std::vector<int> order_;
  std::size_t budget_;
  std::size_t live_ = 0;
  std::unordered_map<NodeId, Poly> memo_;
  std::vector<NodeId> atoms_;
  std::unordered_map<NodeId, int> atom_index_;
};

inline std::vector<NodeId> expand(ExprGraph& g, const std::vector<NodeId>& roots,
                                  std::size_t term_budget = kDefaultNodeBudget) {
  return Expander(g, term_budget)(roots);
}

}  // namespace amdyn::symx
