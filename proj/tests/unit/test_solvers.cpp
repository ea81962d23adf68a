#include <gtest/gtest.h>

#include <cstdlib>

#include "support.hpp"
#include "zocbf/models.hpp"
#include "zocbf/solvers.hpp"

using namespace zocbf;
using zocbf::testing::Gen;
using zocbf::testing::vec;

namespace {

const InputBox kBox1 = InputBox::uniform(1, -10.0, 10.0);

MarginSet affine_margins(const std::vector<LinearConstraint> & lin)
{
  std::vector<ScalarMap> fns;
  for (const auto & c : lin) { fns.push_back([c](const Vector & u) { return c(u); }); }
  return MarginSet::from_list(fns);
}

// Brute-force optimum over a grid with n points per dimension (m <= 2).
double grid_objective(const Vector & u_nom, const InputBox & box, int n,
                      const std::function<bool(const Vector &)> & feasible)
{
  double best = INFINITY;
  const int m = box.dim();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < (m == 2 ? n : 1); ++j) {
      Vector u(m);
      u[0] = box.lower[0] + (box.upper[0] - box.lower[0]) * i / (n - 1);
      if (m == 2) { u[1] = box.lower[1] + (box.upper[1] - box.lower[1]) * j / (n - 1); }
      if (feasible(u)) { best = std::min(best, (u - u_nom).norm()); }
    }
  }
  return best;
}

}  // namespace

TEST(ProjectBox, Examples)
{
  EXPECT_EQ(project_box(vec({15.0}), kBox1), vec({10.0}));
  EXPECT_EQ(project_box(vec({3.0}), kBox1), vec({3.0}));
  EXPECT_EQ(project_box(vec({-20.0, 5.0}), InputBox::uniform(2, -10.0, 10.0)), vec({-10.0, 5.0}));
}

TEST(FilterBackend, ValidationAndLabels)
{
  EXPECT_THROW(FilterBackend::rk_nonlinear(3).validate(), std::invalid_argument);
  EXPECT_THROW(FilterBackend::sampling(2).validate(), std::invalid_argument);
  EXPECT_EQ(FilterBackend::rk_nonlinear(4).label(), "rk_nonlinear(p=4)");
  EXPECT_EQ(FilterBackend::sampling(401).label(), "sampling(S=401)");
  EXPECT_EQ(FilterBackend::linearized_linear().label(), "linearized_linear");
  EXPECT_EQ(FilterBackend::no_filter().label(), "no_filter");
}

TEST(HalfspaceQp, Examples)
{
  const std::vector<LinearConstraint> inactive{{vec({-0.005}), 9.79}};
  const auto a = solve_qp_halfspace_box(vec({0.0}), inactive, kBox1);
  EXPECT_EQ(a.u, vec({0.0}));
  EXPECT_EQ(a.status, FilterStatus::optimal);

  const std::vector<LinearConstraint> upper{{vec({-1.0}), 2.0}};
  const auto b = solve_qp_halfspace_box(vec({5.0}), upper, kBox1);
  EXPECT_NEAR(b.u[0], 2.0, 1e-10);
  EXPECT_EQ(b.status, FilterStatus::optimal);
  EXPECT_NEAR(b.objective, 3.0, 1e-10);

  const std::vector<LinearConstraint> impossible{{vec({1.0}), -20.0}};
  const auto c = solve_qp_halfspace_box(vec({0.0}), impossible, kBox1);
  EXPECT_EQ(c.status, FilterStatus::infeasible);
  EXPECT_NEAR(c.u[0], 10.0, 1e-9);  // least violating

  const std::vector<LinearConstraint> degenerate{{vec({0.0}), -1.0}};
  EXPECT_EQ(solve_qp_halfspace_box(vec({0.0}), degenerate, kBox1).status, FilterStatus::infeasible);
}

TEST(HalfspaceQp, TwoConstraintsVertex)
{
  // u0 + u1 <= 1 and u0 - u1 <= 0 from u_nom = (3, 3): optimum (0.5, 0.5)
  const std::vector<LinearConstraint> lin{{vec({-1.0, -1.0}), 1.0}, {vec({-1.0, 1.0}), 0.0}};
  const auto r = solve_qp_halfspace_box(vec({3.0, 3.0}), lin, InputBox::uniform(2, -10.0, 10.0));
  EXPECT_EQ(r.status, FilterStatus::optimal);
  EXPECT_LT((r.u - vec({0.5, 0.5})).norm(), 1e-8);
}

TEST(QcqpBox, Examples)
{
  const std::vector<QuadraticConstraint> band{{(Matrix(1, 1) << -0.005 * 0.005).finished(), vec({-2 * 0.005 * 0.2}),
                                               -0.04 + 9.99}};
  const auto a = solve_qcqp_box(vec({0.0}), band, {}, kBox1);
  EXPECT_EQ(a.u, vec({0.0}));

  // -(u - 1)^2 + 0.25 >= 0 -> u in [0.5, 1.5]
  const std::vector<QuadraticConstraint> bowl{{(Matrix(1, 1) << -1.0).finished(), vec({2.0}), -0.75}};
  const auto b = solve_qcqp_box(vec({0.0}), bowl, {}, kBox1);
  EXPECT_EQ(b.status, FilterStatus::optimal);
  EXPECT_NEAR(b.u[0], 0.5, 1e-8);
}

TEST(QcqpBox, ZeroQuadraticMatchesHalfspaceQp)
{
  Gen gen(51);
  const InputBox box = InputBox::uniform(2, -10.0, 10.0);
  for (int i = 0; i < 30; ++i) {
    const Vector u_nom = gen.vector(2, -12.0, 12.0);
    const LinearConstraint lc{gen.vector(2, -1.0, 1.0), gen.uniform(-3.0, 1.0)};
    const QuadraticConstraint qc{Matrix::Zero(2, 2), lc.a, lc.b};
    const auto a = solve_qp_halfspace_box(u_nom, std::vector<LinearConstraint>{lc}, box);
    const auto b = solve_qcqp_box(u_nom, std::vector<QuadraticConstraint>{qc}, {}, box);
    EXPECT_EQ(a.status, b.status);
    EXPECT_LT((a.u - b.u).norm(), 1e-7);
  }
}

TEST(QcqpBox, RejectsConvexUpwardQuadratic)
{
  const std::vector<QuadraticConstraint> up{{(Matrix(1, 1) << 1.0).finished(), vec({0.0}), -4.0}};
  EXPECT_THROW(solve_qcqp_box(vec({0.0}), up, {}, kBox1), NonconvexityError);
  // a feasible projected nominal is returned before the convexity check
  const auto r = solve_qcqp_box(vec({5.0}), up, {}, kBox1);
  EXPECT_EQ(r.u, vec({5.0}));
}

TEST(QcqpBox, MixedQuadraticAndLinear)
{
  // unit disc and u0 >= 0.5 from u_nom = (-2, 0): optimum (0.5, 0)
  const std::vector<QuadraticConstraint> disc{{-Matrix::Identity(2, 2), Vector::Zero(2), 1.0}};
  const std::vector<LinearConstraint> lin{{vec({1.0, 0.0}), -0.5}};
  const auto r = solve_qcqp_box(vec({-2.0, 0.0}), disc, lin, InputBox::uniform(2, -10.0, 10.0));
  EXPECT_EQ(r.status, FilterStatus::optimal);
  EXPECT_LT((r.u - vec({0.5, 0.0})).norm(), 1e-7);
}

TEST(Solvers, OracleEquivalenceOnRandomInstances)
{
  Gen gen(52);
  constexpr int kGrid = 801;
  for (int i = 0; i < 40; ++i) {
    const int m = 1 + i % 2;
    const InputBox box = InputBox::uniform(m, -10.0, 10.0);
    const double cell = box.diagonal() / (kGrid - 1);
    const Vector u_nom = gen.vector(m, -12.0, 12.0);
    const Vector anchor = gen.vector(m, -8.0, 8.0);
    LinearConstraint lc{gen.vector(m, -1.0, 1.0), 0.0};
    lc.b = -lc.a.dot(anchor) + gen.uniform(0.0, 1.0);
    const auto r = solve_qp_halfspace_box(u_nom, std::vector<LinearConstraint>{lc}, box);
    const double g = grid_objective(u_nom, box, kGrid, [&](const Vector & u) { return lc(u) >= 0.0; });
    EXPECT_NE(r.status, FilterStatus::infeasible);
    EXPECT_LE(r.objective, g + 1e-12);
    EXPECT_GE(r.objective, g - cell);

    const Matrix R = gen.matrix(m, m, -1.0, 1.0);
    QuadraticConstraint qc{-0.1 * R.transpose() * R, Vector(), 0.0};
    qc.q = -2.0 * qc.Q * anchor;
    qc.c = anchor.dot(qc.Q * anchor) + gen.uniform(0.5, 4.0);
    const auto rq = solve_qcqp_box(u_nom, std::vector<QuadraticConstraint>{qc}, {}, box);
    const double gq = grid_objective(u_nom, box, kGrid, [&](const Vector & u) { return qc(u) >= 0.0; });
    EXPECT_NE(rq.status, FilterStatus::infeasible);
    EXPECT_LE(rq.objective, gq + 1e-9);
    EXPECT_GE(rq.objective, gq - cell);
  }
}

TEST(Sqp, AffineMarginsMatchHalfspaceQp)
{
  Gen gen(53);
  const InputBox box = InputBox::uniform(2, -10.0, 10.0);
  for (int i = 0; i < 30; ++i) {
    const Vector u_nom = gen.vector(2, -12.0, 12.0);
    std::vector<LinearConstraint> lin;
    const Vector anchor = gen.vector(2, -8.0, 8.0);
    for (int c = 0; c < 2; ++c) {
      LinearConstraint lc{gen.vector(2, -1.0, 1.0), 0.0};
      lc.b = -lc.a.dot(anchor) + gen.uniform(0.0, 1.0);
      lin.push_back(lc);
    }
    const auto qp = solve_qp_halfspace_box(u_nom, lin, box);
    const auto sqp = solve_sqp_box(u_nom, affine_margins(lin), box);
    EXPECT_NE(sqp.status, FilterStatus::infeasible);
    EXPECT_LT((qp.u - sqp.u).norm(), 1e-6) << "instance " << i;
  }
}

TEST(Sqp, InfeasibleReportsLeastViolatingInput)
{
  const std::vector<LinearConstraint> impossible{{vec({1.0}), -20.0}};
  SqpOptions opts;
  opts.warm_start = vec({-3.0});
  const auto r = solve_sqp_box(vec({0.0}), affine_margins(impossible), kBox1, opts);
  EXPECT_EQ(r.status, FilterStatus::infeasible);
  EXPECT_NEAR(r.u[0], 10.0, 1e-6);
}

TEST(Sampling, Examples)
{
  const auto nominal = solve_sampling(vec({0.1234}), affine_margins({{vec({-1.0}), 2.0}}), kBox1, 401);
  EXPECT_EQ(nominal.u, vec({0.1234}));

  const auto clipped = solve_sampling(vec({5.0}), affine_margins({{vec({-1.0}), 2.0}}), kBox1, 401);
  EXPECT_EQ(clipped.status, FilterStatus::optimal);
  EXPECT_NEAR(clipped.u[0], 2.0, 0.05);
  EXPECT_LE(clipped.u[0], 2.0);

  const auto none = solve_sampling(vec({0.0}), affine_margins({{vec({0.0}), -1.0}}), kBox1, 401);
  EXPECT_EQ(none.status, FilterStatus::infeasible);

  EXPECT_THROW(solve_sampling(vec({0.0}), affine_margins({}), kBox1, 2), std::invalid_argument);
  EXPECT_THROW(solve_sampling(Vector::Zero(4), affine_margins({}), InputBox::uniform(4, -1.0, 1.0), 3),
               std::invalid_argument);
}

TEST(Sampling, DeterministicAcrossWorkerCounts)
{
  // a disc of radius 1 around (3, 3) sampled from u_nom = 0; ties are common on the grid
  const MarginSet disc = MarginSet::from_list({[](const Vector & u) { return 1.0 - (u - vec({3.0, 3.0})).squaredNorm(); }});
  const InputBox box = InputBox::uniform(2, -10.0, 10.0);
  const auto a = solve_sampling(Vector::Zero(2), disc, box, 201, 1);
  for (int workers : {2, 3, 7}) {
    const auto b = solve_sampling(Vector::Zero(2), disc, box, 201, workers);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.margin, b.margin);
  }
}

TEST(Sampling, WorkerCountFromEnvironment)
{
  ::setenv("ZOCBF_WORKERS", "3", 1);
  EXPECT_EQ(default_worker_count(), 3);
  ::setenv("ZOCBF_WORKERS", "0", 1);
  EXPECT_GE(default_worker_count(), 1);
  ::unsetenv("ZOCBF_WORKERS");
}

TEST(SafetyFilterStep, DoubleIntegratorExamples)
{
  const auto sys = models::double_integrator();
  const std::vector<ConstraintFunction> hs{models::position_limit()};
  const ZocbfParams p{0.1, 0.01, ClassKappa::linear(1.0), 0.0};
  const auto free = safety_filter_step(FilterBackend::linearized_linear(), sys, hs, p, vec({0.0, 2.0}), vec({0.0}),
                                       vec({0.0}), kBox1);
  EXPECT_EQ(free.u, vec({0.0}));
  EXPECT_NEAR(free.margin, 9.79, 1e-12);

  const auto brake = safety_filter_step(FilterBackend::linearized_linear(), sys, hs, p, vec({9.8, 2.0}), vec({0.0}),
                                        vec({0.0}), kBox1);
  EXPECT_EQ(brake.status, FilterStatus::optimal);
  EXPECT_NEAR(brake.u[0], -2.0, 1e-9);

  const auto sqp = safety_filter_step(FilterBackend::rk_nonlinear(4), sys, hs, p, vec({0.0, 2.0}), vec({0.0}),
                                      vec({0.0}), kBox1);
  EXPECT_EQ(sqp.u, vec({0.0}));
}

TEST(SafetyFilterStep, NominalPassThroughOnEveryBackend)
{
  const auto terrain = models::flat_terrain();
  const auto sys = models::rollover_robot(terrain);
  const auto hs = models::rollover_constraints(terrain, {});
  const ZocbfParams p{0.1, 0.05, ClassKappa::linear(0.5), 0.0};
  const InputBox box{vec({-2.0, -4.0}), vec({2.0, 4.0})};
  const Vector x = vec({1.0, 2.0, 0.3});
  const Vector u_nom = vec({0.8, 0.4});
  for (const auto & b : {FilterBackend::linearized_linear(), FilterBackend::linearized_quadratic(),
                         FilterBackend::rk_nonlinear(4), FilterBackend::rk_nonlinear(2), FilterBackend::sampling(101),
                         FilterBackend::no_filter()}) {
    const auto r = safety_filter_step(b, sys, hs, p, x, u_nom, u_nom, box);
    EXPECT_EQ(r.u, u_nom) << b.label();
    EXPECT_EQ(r.objective, 0.0) << b.label();
    EXPECT_EQ(r.status, FilterStatus::optimal) << b.label();
  }
}

TEST(SafetyFilterStep, FeasibleResultsHaveNonnegativeMargin)
{
  const models::RolloverScenario s;
  const auto terrain = s.terrain();
  const auto sys = models::rollover_robot(terrain);
  const auto hs = models::rollover_constraints(terrain, s.robot);
  Gen gen(54);
  for (int i = 0; i < 15; ++i) {
    const Vector x = vec({gen.uniform(0.0, 8.0), gen.uniform(-1.0, 1.0), gen.uniform(0.0, 6.28)});
    const Vector u_prev = vec({gen.uniform(0.0, 1.5), gen.uniform(-2.0, 2.0)});
    const Vector u_nom = vec({gen.uniform(0.0, 2.0), gen.uniform(-4.0, 4.0)});
    for (const auto & b : {FilterBackend::rk_nonlinear(4), FilterBackend::sampling(101)}) {
      const auto r = safety_filter_step(b, sys, hs, s.params, x, u_prev, u_nom, s.box);
      if (r.status == FilterStatus::infeasible) { continue; }
      const MarginSet exact = make_margin_set(sys, hs, s.params, x, u_prev,
                                              b.kind == FilterBackend::Kind::sampling
                                                ? FlowChoice{ReferenceFlow{1}}
                                                : FlowChoice{RungeKuttaFlow{}});
      EXPECT_GE(exact.eval(r.u).minCoeff(), -1e-6) << b.label();
      EXPECT_TRUE(s.box.contains(r.u, 1e-12));
    }
  }
}

TEST(SafetyFilterStep, RepeatedCallsAreBitIdentical)
{
  const models::RolloverScenario s;
  const auto terrain = s.terrain();
  const auto sys = models::rollover_robot(terrain);
  const auto hs = models::rollover_constraints(terrain, s.robot);
  const Vector x = vec({2.5, 0.2, 0.4});
  const Vector u_prev = vec({1.5, 2.0});
  const Vector u_nom = vec({2.0, 3.5});
  for (const auto & b : {FilterBackend::linearized_linear(), FilterBackend::rk_nonlinear(4),
                         FilterBackend::sampling(101)}) {
    const auto a = safety_filter_step(b, sys, hs, s.params, x, u_prev, u_nom, s.box);
    const auto c = safety_filter_step(b, sys, hs, s.params, x, u_prev, u_nom, s.box);
    EXPECT_EQ(a.u, c.u) << b.label();
  }
}
