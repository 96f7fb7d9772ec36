#pragma once

// Closed-form M, C (or h) and g of a model as expression graphs, plus the
// expand → count → emit pipeline used for the operation-count comparisons.

#include <chrono>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "amdyn/dynamics.hpp"
#include "amdyn/symx/codegen.hpp"
#include "amdyn/symx/diff.hpp"
#include "amdyn/symx/expand.hpp"
#include "amdyn/symx/graph.hpp"

namespace amdyn::symx {

enum class Parameterization { Quaternion, Euler };

inline const char* to_string(Parameterization p) { return p == Parameterization::Euler ? "euler" : "quaternion"; }

inline Parameterization parse_parameterization(const std::string& s) {
  if (s == "quaternion") return Parameterization::Quaternion;
  if (s == "euler") return Parameterization::Euler;
  throw ValidationError("unknown parameterization '" + s + "' (quaternion, euler)");
}

struct SymbolicOptions {
  int link_budget = 3;
  std::size_t node_budget = kDefaultNodeBudget;
};

/// Symbols 0..n−1 are the coordinates and n..2n−1 the velocities, so a flat
/// input array is [x, ẋ].
struct SymbolicDynamics {
  std::unique_ptr<ExprGraph> graph;
  Parameterization parameterization = Parameterization::Quaternion;
  CoriolisMethod method = CoriolisMethod::Mixed;
  int n = 0;
  std::vector<NodeId> M;  // n·n, column-major
  std::vector<NodeId> C;  // n·n, column-major (Christoffel only)
  std::vector<NodeId> h;  // n (energy and mixed)
  std::vector<NodeId> g;  // n
  double build_seconds = 0.0;

  /// The Coriolis roots: C for Christoffel, h otherwise.
  const std::vector<NodeId>& coriolis() const { return method == CoriolisMethod::Christoffel ? C : h; }
  const char* coriolis_name() const { return method == CoriolisMethod::Christoffel ? "C" : "h"; }

  std::vector<double> inputs(const VecXd& x, const VecXd& dx) const {
    if (x.size() != n || dx.size() != n) throw DimensionError("state has wrong dimension for the symbolic model");
    std::vector<double> in(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
      in[static_cast<std::size_t>(i)] = x[i];
      in[static_cast<std::size_t>(n + i)] = dx[i];
    }
    return in;
  }
};

namespace detail {

template <class P>
void build(const Model& model, SymbolicDynamics& sd) {
  ExprGraph& g = *sd.graph;
  GraphScope scope(g);
  const int n = P::rot_dim + 3 + model.num_joints();
  sd.n = n;
  VecX<Expr> x(n), dx(n);
  for (int i = 0; i < n; ++i) x[i] = Expr::symbol("x" + std::to_string(i));
  for (int i = 0; i < n; ++i) dx[i] = Expr::symbol("dx" + std::to_string(i));

  const MatX<Expr> M = mass_matrix<P, Expr>(model, x);
  sd.M = ids(M);

  // ∂/∂x_k, one memoizing pass per coordinate
  std::vector<Differentiator> d;
  for (int k = 0; k < n; ++k) d.emplace_back(g, x[k].id());
  auto dM = [&](int k, int i, int j) { return Expr::from_id(d[std::size_t(k)](M(i, j).id())); };

  switch (sd.method) {
    case CoriolisMethod::Christoffel: {
      MatX<Expr> C(n, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          Expr c(0.0);
          for (int k = 0; k < n; ++k) c += Expr(0.5) * (dM(k, i, j) + dM(j, i, k) - dM(i, j, k)) * dx[k];
          C(i, j) = c;
        }
      sd.C = ids(C);
      break;
    }
    case CoriolisMethod::Energy: {
      const Expr E = kinetic_energy<P, Expr>(model, x, dx);
      VecX<Expr> h(n);
      for (int i = 0; i < n; ++i) {
        const Expr pi = differentiate(E, dx[i]);
        Expr hi = -differentiate(E, x[i]);
        for (int j = 0; j < n; ++j) hi += differentiate(pi, x[j]) * dx[j];
        h[i] = hi;
      }
      sd.h = ids(h);
      break;
    }
    case CoriolisMethod::Mixed: {
      MatX<Expr> Mdot(n, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          Expr s(0.0);
          for (int k = 0; k < n; ++k) s += dM(k, i, j) * dx[k];
          Mdot(i, j) = s;
        }
      VecX<Expr> h = Mdot.lazyProduct(dx);
      for (int k = 0; k < n; ++k) {
        Expr q(0.0);
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) q += dx[i] * dM(k, i, j) * dx[j];
        h[k] -= Expr(0.5) * q;
      }
      sd.h = ids(h);
      break;
    }
  }

  const Expr V = potential_energy<P, Expr>(model, x);
  VecX<Expr> gv(n);
  for (int k = 0; k < n; ++k) gv[k] = differentiate(V, x[k]);
  sd.g = ids(gv);
}

}  // namespace detail

inline SymbolicDynamics build_symbolic_dynamics(const Model& model, CoriolisMethod method,
                                                Parameterization param = Parameterization::Quaternion,
                                                const SymbolicOptions& opt = {}) {
  if (model.num_joints() > opt.link_budget)
    throw BudgetError("model has " + std::to_string(model.num_joints()) + " links, symbolic budget is " +
                      std::to_string(opt.link_budget));
  for (int id : model.tree.all_joints()) {
    const auto t = model.tree.node(id).joint_type;
    if (t != JointType::Revolute && t != JointType::Continuous && t != JointType::Fixed)
      throw UnsupportedFeature("symbolic dynamics supports revolute, continuous and fixed joints only");
  }
  const auto t0 = std::chrono::steady_clock::now();
  SymbolicDynamics sd;
  sd.graph = std::make_unique<ExprGraph>(opt.node_budget);
  sd.parameterization = param;
  sd.method = method;
  if (param == Parameterization::Euler) detail::build<EulerBase>(model, sd);
  else detail::build<QuaternionBase>(model, sd);
  sd.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sd;
}

/// Matrix name, its roots after expansion and the operation count of the shared DAG.
struct MatrixCount {
  std::string matrix;
  std::vector<NodeId> roots;
  OpCounts ops;
};

struct OpCountReport {
  std::string model;
  int links = 0;
  Parameterization parameterization = Parameterization::Quaternion;
  CoriolisMethod method = CoriolisMethod::Mixed;
  std::vector<MatrixCount> matrices;  // M, C or h, g
  double gen_seconds = 0.0;           // build + expand wall time, not reproducible

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& m : matrices) t += m.ops.total();
    return t;
  }
  std::size_t ops(const std::string& matrix) const {
    for (const auto& m : matrices)
      if (m.matrix == matrix) return m.ops.total();
    throw LookupError("no matrix '" + matrix + "' in report");
  }
};

/// Expands every matrix of `sd` (in its own graph) and counts operations per matrix.
inline OpCountReport count_dynamics(SymbolicDynamics& sd, const std::string& model_name, int links,
                                    std::size_t term_budget = kDefaultNodeBudget) {
  const auto t0 = std::chrono::steady_clock::now();
  OpCountReport r;
  r.model = model_name;
  r.links = links;
  r.parameterization = sd.parameterization;
  r.method = sd.method;
  const std::pair<const char*, const std::vector<NodeId>*> parts[] = {
      {"M", &sd.M}, {sd.coriolis_name(), &sd.coriolis()}, {"g", &sd.g}};
  for (const auto& [name, roots] : parts) {
    MatrixCount mc;
    mc.matrix = name;
    mc.roots = expand(*sd.graph, *roots, term_budget);
    mc.ops = count_ops(*sd.graph, mc.roots);
    r.matrices.push_back(std::move(mc));
  }
  r.gen_seconds = sd.build_seconds + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void write_op_count_header(std::ostream& os) { os << "model,links,parameterization,method,matrix,ops,gen_seconds\n"; }

/// One row per matrix plus a `total` row.
inline void write_op_count_rows(std::ostream& os, const OpCountReport& r, bool with_time = true) {
  auto row = [&](const std::string& matrix, std::size_t ops) {
    os << r.model << ',' << r.links << ',' << to_string(r.parameterization) << ',' << amdyn::to_string(r.method) << ','
       << matrix << ',' << ops << ',';
    if (with_time) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.gen_seconds);
      os << buf;
    }
    os << '\n';
  };
  for (const auto& m : r.matrices) row(m.matrix, m.ops.total());
  row("total", r.total());
}

/// `{model}_{matrix}_{method}`; Euler variants carry an `_euler` model suffix.
inline std::string function_name(const std::string& model, Parameterization p, const std::string& matrix,
                                 CoriolisMethod method) {
  std::string base = model;
  if (p == Parameterization::Euler) base += "_euler";
  return base + "_" + matrix + "_" + amdyn::to_string(method);
}

/// Emits one C function per matrix of an expanded report.
inline std::string emit_dynamics(const SymbolicDynamics& sd, const OpCountReport& r) {
  std::string out = "/* M, " + std::string(sd.coriolis_name()) + " and g of " + r.model + " (" +
                    to_string(r.parameterization) + ", " + amdyn::to_string(r.method) +
                    "); in = [x, dx], out column-major */\n#include <math.h>\n\n";
  for (const auto& m : r.matrices)
    out += emit_code(*sd.graph, cse(*sd.graph, m.roots), function_name(r.model, r.parameterization, m.matrix, r.method)) +
           "\n";
  return out;
}

}  // namespace amdyn::symx
