#include "support.hpp"

#include <map>
#include <sstream>

#include "amdyn/symx/dynamics.hpp"

using namespace amdyn;
using namespace amdyn::test;
using namespace amdyn::symx;

namespace {

double eval1(const ExprGraph& g, const Expr& e, const std::vector<double>& sym) { return evaluate(g, {e.id()}, sym)[0]; }

// numeric quantities in the same column-major layout as the symbolic roots
std::vector<double> flat(const MatXd& m) { return std::vector<double>(m.data(), m.data() + m.size()); }
std::vector<double> flat(const VecXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::map<std::string, std::size_t> totals() {
  static std::map<std::string, std::size_t> cache;
  if (!cache.empty()) return cache;
  for (const char* name : kModels) {
    const Model m = bundled(name);
    for (Parameterization p : {Parameterization::Quaternion, Parameterization::Euler})
      for (CoriolisMethod meth : {CoriolisMethod::Christoffel, CoriolisMethod::Energy, CoriolisMethod::Mixed}) {
        SymbolicDynamics sd = build_symbolic_dynamics(m, meth, p);
        cache[std::string(name) + "/" + to_string(p) + "/" + amdyn::to_string(meth)] =
            count_dynamics(sd, name, m.num_joints()).total();
      }
  }
  return cache;
}

}  // namespace

TEST(Symx, HashConsingAndFolding) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr x = Expr::symbol("x"), y = Expr::symbol("y");
  EXPECT_EQ(x * y, y * x);
  EXPECT_EQ(x + y, y + x);
  EXPECT_EQ(x + 0.0, x);
  EXPECT_EQ(x * 1.0, x);
  EXPECT_EQ((x * 0.0).id(), g.zero());
  EXPECT_EQ(x * -1.0, -x);
  EXPECT_TRUE(g.is_const((Expr(2.0) * Expr(3.0) + 1.0).id(), 7.0));
  EXPECT_EQ(Expr::symbol("x"), x);
  const std::size_t n = g.size();
  (void)(sin(x) * cos(y) + sin(x) * cos(y));
  const std::size_t grown = g.size() - n;
  (void)(sin(x) * cos(y) + sin(x) * cos(y));
  EXPECT_EQ(g.size() - n, grown);
}

TEST(Symx, ProductRule) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr x = Expr::symbol("x"), y = Expr::symbol("y");
  EXPECT_EQ(differentiate(x * y, x), y);
  EXPECT_EQ(differentiate(x * y, y), x);
  EXPECT_TRUE(g.is_const(differentiate(y, x).id(), 0.0));
  EXPECT_TRUE(g.is_const(differentiate(x, x).id(), 1.0));
}

TEST(Symx, QuaternionNormDerivative) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr w = Expr::symbol("q_w"), a = Expr::symbol("q_x"), b = Expr::symbol("q_y"), c = Expr::symbol("q_z");
  const Expr n2 = w * w + a * a + b * b + c * c;
  const Expr d = differentiate(n2, w);
  for (double v : {0.3, -1.7, 2.0}) EXPECT_EQ(eval1(g, d, {v, 0.1, 0.2, 0.3}), 2.0 * v);
  EXPECT_EQ(expand(g, {d.id()}), expand(g, {(2.0 * w).id()}));
}

TEST(Symx, DerivativesMatchFiniteDifferences) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr x = Expr::symbol("x"), y = Expr::symbol("y");
  const Expr f = sin(x * y) / (1.0 + x * x) + sqrt(2.0 + cos(y)) * powi(x - y, 3);
  const Expr dfx = differentiate(f, x), dfy = differentiate(f, y);
  std::mt19937_64 rng(91);
  const double h = 1e-6;
  for (int k = 0; k < 50; ++k) {
    const VecXd p = random_vec(rng, 2, 2.0);
    const double fxp = eval1(g, f, {p[0] + h, p[1]}), fxm = eval1(g, f, {p[0] - h, p[1]});
    const double fyp = eval1(g, f, {p[0], p[1] + h}), fym = eval1(g, f, {p[0], p[1] - h});
    EXPECT_NEAR(eval1(g, dfx, {p[0], p[1]}), (fxp - fxm) / (2 * h), 1e-7);
    EXPECT_NEAR(eval1(g, dfy, {p[0], p[1]}), (fyp - fym) / (2 * h), 1e-7);
  }
}

TEST(Symx, DifferentiationIsLinear) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr x = Expr::symbol("x"), y = Expr::symbol("y");
  const Expr f = sin(x) * y, h = x * x * cos(y);
  const Expr lhs = differentiate(3.0 * f - 2.0 * h, x);
  const Expr rhs = 3.0 * differentiate(f, x) - 2.0 * differentiate(h, x);
  std::mt19937_64 rng(92);
  for (int k = 0; k < 20; ++k) {
    const VecXd p = random_vec(rng, 2, 3.0);
    EXPECT_NEAR(eval1(g, lhs, {p[0], p[1]}), eval1(g, rhs, {p[0], p[1]}), 1e-12);
  }
  EXPECT_EQ(expand(g, {lhs.id()}), expand(g, {rhs.id()}));
}

TEST(Symx, ExpansionAndCounting) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr a = Expr::symbol("a"), b = Expr::symbol("b"), x = Expr::symbol("x"), y = Expr::symbol("y");
  // (a + b)² → a² + 2ab + b²
  Expander ex(g);
  EXPECT_EQ(ex.expand_poly(((a + b) * (a + b)).id()).size(), 3u);
  // the unexpanded product shares (a + b): one add and one multiply
  EXPECT_EQ(count_ops(g, {((a + b) * (a + b)).id()}).total(), 2u);
  EXPECT_EQ(count_ops(g, {(x + x * y).id()}).total(), 2u);
  EXPECT_EQ(count_ops(g, {Expr(4.5).id()}).total(), 0u);
  EXPECT_EQ(count_ops(g, {a.id()}).total(), 0u);
  // a − a cancels
  const auto z = expand(g, {(a * b - b * a + 0.0 * x).id()});
  EXPECT_TRUE(g.is_const(z[0], 0.0));
  // expansion preserves values
  const Expr f = (a + 2.0 * b) * (x - y) * (a - b) + sin(x) * (a + b);
  const auto e = expand(g, {f.id()});
  std::mt19937_64 rng(93);
  for (int k = 0; k < 20; ++k) {
    const VecXd v = random_vec(rng, 4, 2.0);
    const std::vector<double> in{v[0], v[1], v[2], v[3]};
    EXPECT_NEAR(evaluate(g, e, in)[0], eval1(g, f, in), 1e-12);
  }
}

TEST(Symx, ExpansionIsCanonical) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr a = Expr::symbol("a"), b = Expr::symbol("b");
  const auto one = expand(g, {((a + b) * (a - b)).id()});
  const auto two = expand(g, {(a * a - b * b).id()});
  EXPECT_EQ(one, two);
}

TEST(Symx, CseSharesRepeatedWork) {
  ExprGraph g;
  GraphScope scope(g);
  const Expr x = Expr::symbol("x"), y = Expr::symbol("y");
  const Expr s = sin(x + y);
  const std::vector<NodeId> roots = ids(std::vector<Expr>{s * x, s * y, s});
  const CseResult c = cse(g, roots);
  EXPECT_TRUE(c.is_temp(s.id()));
  const std::string code = emit_code(g, c, "f");
  std::size_t sins = 0;
  for (std::size_t pos = code.find("sin("); pos != std::string::npos; pos = code.find("sin(", pos + 1)) ++sins;
  EXPECT_EQ(sins, 1u);
}

TEST(Symx, BudgetsAreEnforced) {
  ExprGraph small(64);
  GraphScope scope(small);
  EXPECT_THROW(
      {
        Expr acc = Expr::symbol("x");
        for (int i = 0; i < 100; ++i) acc = acc * acc + static_cast<double>(i);
      },
      BudgetError);
  const Model m = bundled("am_3link");
  SymbolicOptions opt;
  opt.link_budget = 2;
  EXPECT_THROW(build_symbolic_dynamics(m, CoriolisMethod::Mixed, Parameterization::Quaternion, opt), BudgetError);
  opt.link_budget = 3;
  opt.node_budget = 1000;
  EXPECT_THROW(build_symbolic_dynamics(m, CoriolisMethod::Mixed, Parameterization::Quaternion, opt), BudgetError);
  EXPECT_THROW(parse_parameterization("rodrigues"), ValidationError);
}

TEST(Symx, FloatingBaseMassBlock) {
  const Model m = bundled("uav_0link");
  SymbolicDynamics sd = build_symbolic_dynamics(m, CoriolisMethod::Mixed);
  ASSERT_EQ(sd.n, 7);
  const auto M = expand(*sd.graph, sd.M);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(sd.graph->is_const(M[std::size_t(j * 7 + i)], i == j ? 6.0 : 0.0));
  // translation and rotation decouple for a CM at the base origin
  for (int j = 3; j < 7; ++j)
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(sd.graph->is_const(M[std::size_t(j * 7 + i)], 0.0));
  // gravity only acts on p_z
  const auto gv = expand(*sd.graph, sd.g);
  EXPECT_TRUE(sd.graph->is_const(gv[2], 6.0 * 9.81));
  EXPECT_EQ(count_ops(*sd.graph, gv).total(), 0u);
}

TEST(Symx, AgreesWithNumericDynamics) {
  std::mt19937_64 rng(94);
  for (const char* name : kModels) {
    const Model m = bundled(name);
    const int nj = m.num_joints();
    for (CoriolisMethod meth : {CoriolisMethod::Christoffel, CoriolisMethod::Mixed}) {
      SymbolicDynamics sd = build_symbolic_dynamics(m, meth);
      const auto rep = count_dynamics(sd, name, nj);
      Tape tM(*sd.graph, rep.matrices[0].roots), tC(*sd.graph, rep.matrices[1].roots),
          tg(*sd.graph, rep.matrices[2].roots);
      double worst = 0.0;
      for (int k = 0; k < 100; ++k) {
        const SystemState s = random_state(rng, nj);
        const auto in = sd.inputs(s.x, s.dx);
        worst = std::max(worst, max_diff(tM.evaluate(in), flat(mass_matrix(m, s.x))));
        const auto c = meth == CoriolisMethod::Christoffel ? flat(coriolis_christoffel(m, s.x, s.dx))
                                                            : flat(coriolis_mixed_h(m, s.x, s.dx));
        worst = std::max(worst, max_diff(tC.evaluate(in), c));
        worst = std::max(worst, max_diff(tg.evaluate(in), flat(gravity_vector(m, s.x))));
      }
      EXPECT_LE(worst, 1e-9) << name << " " << amdyn::to_string(meth);
    }
  }
}

TEST(Symx, EulerAgreesWithNumericEuler) {
  std::mt19937_64 rng(95);
  const Model m = bundled("am_2link");
  SymbolicDynamics sd = build_symbolic_dynamics(m, CoriolisMethod::Mixed, Parameterization::Euler);
  ASSERT_EQ(sd.n, 8);
  const auto rep = count_dynamics(sd, "am_2link", 2);
  Tape tM(*sd.graph, rep.matrices[0].roots), th(*sd.graph, rep.matrices[1].roots), tg(*sd.graph, rep.matrices[2].roots);
  for (int k = 0; k < 50; ++k) {
    const VecXd x = random_vec(rng, 8, 1.2), dx = random_vec(rng, 8);
    const auto in = sd.inputs(x, dx);
    EXPECT_LE(max_diff(tM.evaluate(in), flat(MatXd(mass_matrix<EulerBase, double>(m, x)))), 1e-9);
    EXPECT_LE(max_diff(th.evaluate(in), flat(coriolis_mixed_h<EulerBase>(m, x, dx))), 1e-9);
    EXPECT_LE(max_diff(tg.evaluate(in), flat(gravity_vector<EulerBase>(m, x))), 1e-9);
  }
}

TEST(Symx, UnexpandedGraphAgreesToo) {
  std::mt19937_64 rng(96);
  const Model m = bundled("am_1link");
  SymbolicDynamics sd = build_symbolic_dynamics(m, CoriolisMethod::Energy);
  for (int k = 0; k < 20; ++k) {
    const SystemState s = random_state(rng, 1);
    const auto in = sd.inputs(s.x, s.dx);
    EXPECT_LE(max_diff(evaluate(*sd.graph, sd.h, in), flat(coriolis_energy_h(m, s.x, s.dx))), 1e-9);
  }
}

TEST(Symx, OperationCountOrderings) {
  const auto t = totals();
  for (const char* name : kModels) {
    const std::string q = std::string(name) + "/quaternion/";
    EXPECT_GT(t.at(q + "christoffel"), t.at(q + "energy")) << name;
    EXPECT_GT(t.at(q + "christoffel"), t.at(q + "mixed")) << name;
    EXPECT_LE(t.at(q + "mixed"), t.at(q + "energy")) << name;
  }
  for (const char* meth : {"christoffel", "energy", "mixed"})
    EXPECT_GT(t.at(std::string("am_2link/quaternion/") + meth), t.at(std::string("am_2link/euler/") + meth));
}

TEST(Symx, OperationCountsGrowWithLinks) {
  const auto t = totals();
  for (const char* param : {"quaternion", "euler"})
    for (const char* meth : {"christoffel", "energy", "mixed"}) {
      std::size_t prev = 0;
      for (const char* name : kModels) {
        const std::size_t now = t.at(std::string(name) + "/" + param + "/" + meth);
        EXPECT_GT(now, prev) << name << " " << param << " " << meth;
        prev = now;
      }
    }
}

TEST(Symx, OpCountRowsAreDeterministic) {
  const Model m = bundled("am_1link");
  auto rows = [&] {
    SymbolicDynamics sd = build_symbolic_dynamics(m, CoriolisMethod::Christoffel);
    std::ostringstream os;
    write_op_count_rows(os, count_dynamics(sd, "am_1link", 1), false);
    return os.str();
  };
  const std::string a = rows();
  EXPECT_EQ(a, rows());
  EXPECT_NE(a.find("am_1link,1,quaternion,christoffel,M,"), std::string::npos);
  EXPECT_NE(a.find("am_1link,1,quaternion,christoffel,total,"), std::string::npos);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 4);
  EXPECT_EQ(function_name("am_2link", Parameterization::Euler, "M", CoriolisMethod::Mixed), "am_2link_euler_M_mixed");
}
