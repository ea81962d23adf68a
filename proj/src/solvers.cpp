#include "zocbf/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "zocbf/linearization.hpp"

namespace zocbf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kKktTol = 1e-8;
constexpr double kLambdaCap = 1e12;

/// u' Q u + q . u + c; Q may be empty (halfspace).
struct ConcaveConstraint
{
  Matrix Q;
  Vector q;
  double c = 0.0;

  bool is_linear() const { return Q.size() == 0; }
  double operator()(const Vector & u) const
  {
    return (is_linear() ? 0.0 : u.dot(Q * u)) + q.dot(u) + c;
  }
};

double worst(const Vector & g) { return g.size() == 0 ? std::numeric_limits<double>::infinity() : g.minCoeff(); }

bool lex_less(const Vector & a, const Vector & b)
{
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) { return true; }
    if (a[i] > b[i]) { return false; }
  }
  return false;
}

/// Projected Newton for min 0.5 u'Hu - r'u over a box, H symmetric positive definite.
Vector box_qp_projected_newton(const Matrix & H, const Vector & r, const InputBox & box, Vector u)
{
  const auto m = r.size();
  u = project_box(u, box);
  auto obj = [&](const Vector & v) { return 0.5 * v.dot(H * v) - r.dot(v); };
  for (int it = 0; it < 100; ++it) {
    const Vector grad = H * u - r;
    // Bertsekas epsilon-active set: eps = min(eps_bar, ||u - P(u - grad)||)
    const double w = (u - project_box(u - grad, box)).norm();
    const double eps = std::min(1e-6, w);
    if (w <= 1e-15 * (1.0 + r.norm())) { break; }
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < m; ++i) {
      const bool at_lower = u[i] <= box.lower[i] + eps && grad[i] > 0.0;
      const bool at_upper = u[i] >= box.upper[i] - eps && grad[i] < 0.0;
      if (!at_lower && !at_upper) { free.push_back(i); }
    }
    Vector d = Vector::Zero(m);
    if (!free.empty()) {
      const auto k = static_cast<Eigen::Index>(free.size());
      Matrix Hff(k, k);
      Vector gf(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        gf[a] = grad[free[a]];
        for (Eigen::Index b = 0; b < k; ++b) { Hff(a, b) = H(free[a], free[b]); }
      }
      const Vector df = -Hff.ldlt().solve(gf);
      for (Eigen::Index a = 0; a < k; ++a) { d[free[a]] = df[a]; }
    }
    // binding coordinates follow the scaled gradient
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(free.begin(), free.end(), i) == free.end()) { d[i] = -grad[i] / H(i, i); }
    }
    const double f0 = obj(u);
    double alpha = 1.0;
    Vector next = u;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = project_box(u + alpha * d, box);
      if (obj(next) <= f0 + 1e-4 * grad.dot(next - u)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || (next - u).lpNorm<Eigen::Infinity>() <= 1e-16 * (1.0 + u.lpNorm<Eigen::Infinity>())) {
      u = next;
      break;
    }
    u = next;
  }
  return u;
}

struct DualOutcome
{
  Vector u;
  Vector lambda;
  double kkt = std::numeric_limits<double>::infinity();
  bool unbounded = false;
  int sweeps = 0;
  long inner_solves = 0;
};

/**
 * Coordinate-wise dual ascent for min 0.5 ||u - u_nom||^2 s.t. g_i(u) >= 0, u in box, where
 * every g_i is a concave quadratic. g_i(u(lambda)) is nondecreasing in lambda_i, so each
 * coordinate step is a bisection for the root of g_i.
 */
class DualEngine
{
public:
  DualEngine(const Vector & u_nom, std::vector<ConcaveConstraint> cons, const InputBox & box)
      : u_nom_(u_nom), cons_(std::move(cons)), box_(box)
  {
    all_linear_ = std::all_of(cons_.begin(), cons_.end(), [](const auto & c) { return c.is_linear(); });
  }

  Vector inner(const Vector & lambda)
  {
    ++inner_solves_;
    Vector r = u_nom_;
    for (std::size_t i = 0; i < cons_.size(); ++i) {
      if (lambda[i] != 0.0) { r += lambda[i] * cons_[i].q; }
    }
    if (all_linear_) { return project_box(r, box_); }
    const auto m = u_nom_.size();
    Matrix H = Matrix::Identity(m, m);
    for (std::size_t i = 0; i < cons_.size(); ++i) {
      if (lambda[i] != 0.0 && !cons_[i].is_linear()) { H -= 2.0 * lambda[i] * cons_[i].Q; }
    }
    last_inner_ = box_qp_projected_newton(H, r, box_, last_inner_.size() == m ? last_inner_ : project_box(r, box_));
    return last_inner_;
  }

  Vector margins(const Vector & u) const
  {
    Vector g(static_cast<Eigen::Index>(cons_.size()));
    for (std::size_t i = 0; i < cons_.size(); ++i) { g[i] = cons_[i](u); }
    return g;
  }

  double kkt_residual(const Vector & u, const Vector & lambda) const
  {
    double res = 0.0;
    for (std::size_t i = 0; i < cons_.size(); ++i) {
      const double g = cons_[i](u);
      res = std::max(res, -g);
      if (lambda[i] > 0.0) { res = std::max(res, std::abs(g)); }
    }
    return res;
  }

  DualOutcome solve()
  {
    const auto k = static_cast<Eigen::Index>(cons_.size());
    DualOutcome out;
    out.lambda = Vector::Zero(k);
    out.u = inner(out.lambda);
    out.kkt = kkt_residual(out.u, out.lambda);
    for (int sweep = 0; sweep < 1000 && out.kkt > 1e-10 && !out.unbounded; ++sweep) {
      out.sweeps = sweep + 1;
      for (Eigen::Index i = 0; i < k && !out.unbounded; ++i) {
        out.lambda[i] = coordinate_root(out.lambda, i, out.unbounded);
      }
      out.u = inner(out.lambda);
      out.kkt = kkt_residual(out.u, out.lambda);
      if (all_linear_ && out.kkt > 1e-10 && !out.unbounded) { polish_linear(out); }
    }
    out.inner_solves = inner_solves_;
    return out;
  }

private:
  double coordinate_root(Vector lambda, Eigen::Index i, bool & unbounded)
  {
    auto phi = [&](double t) {
      lambda[i] = t;
      return cons_[i](inner(lambda));
    };
    if (phi(0.0) >= 0.0) { return 0.0; }
    double lo = 0.0;
    double hi = std::max(1.0, 2.0 * lambda[i]);
    while (phi(hi) < 0.0) {
      lo = hi;
      hi *= 4.0;
      if (hi > kLambdaCap) {
        unbounded = true;
        return hi;
      }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (phi(mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  }

  /// Exact solve of the linear KKT system for the current active set and box-fixed coordinates.
  void polish_linear(DualOutcome & out)
  {
    const auto m = u_nom_.size();
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < out.lambda.size(); ++i) {
      if (out.lambda[i] > 0.0) { active.push_back(i); }
    }
    if (active.empty()) { return; }
    std::vector<bool> fixed(m, false);
    for (Eigen::Index j = 0; j < m; ++j) {
      fixed[j] = out.u[j] <= box_.lower[j] || out.u[j] >= box_.upper[j];
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    // u_F = u_nom_F + sum_a lambda_a q_aF ; constraints q_a . u + c_a = 0
    Matrix G(na, na);
    Vector rhs(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      const auto & ca = cons_[active[a]];
      double fixed_part = ca.c;
      for (Eigen::Index j = 0; j < m; ++j) {
        fixed_part += ca.q[j] * (fixed[j] ? out.u[j] : u_nom_[j]);
      }
      rhs[a] = -fixed_part;
      for (Eigen::Index b = 0; b < na; ++b) {
        const auto & cb = cons_[active[b]];
        double s = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
          if (!fixed[j]) { s += ca.q[j] * cb.q[j]; }
        }
        G(a, b) = s;
      }
    }
    const Eigen::FullPivLU<Matrix> lu(G);
    if (!lu.isInvertible()) { return; }
    const Vector lam_a = lu.solve(rhs);
    if ((lam_a.array() < 0.0).any() || !lam_a.allFinite()) { return; }
    Vector lambda = Vector::Zero(out.lambda.size());
    for (Eigen::Index a = 0; a < na; ++a) { lambda[active[a]] = lam_a[a]; }
    Vector u = u_nom_;
    for (Eigen::Index a = 0; a < na; ++a) { u += lam_a[a] * cons_[active[a]].q; }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (fixed[j]) { u[j] = out.u[j]; }
    }
    if (!box_.contains(u, 1e-12)) { return; }
    u = project_box(u, box_);
    // box multipliers of fixed coordinates must have the right sign
    const Vector grad = (u - u_nom_) - [&] {
      Vector s = Vector::Zero(m);
      for (Eigen::Index a = 0; a < na; ++a) { s += lam_a[a] * cons_[active[a]].q; }
      return s;
    }();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!fixed[j]) { continue; }
      if (u[j] <= box_.lower[j] && grad[j] < -1e-12) { return; }
      if (u[j] >= box_.upper[j] && grad[j] > 1e-12) { return; }
    }
    const double kkt = kkt_residual(u, lambda);
    if (kkt < out.kkt) {
      out.u = u;
      out.lambda = lambda;
      out.kkt = kkt;
    }
  }

  Vector u_nom_;
  std::vector<ConcaveConstraint> cons_;
  InputBox box_;
  bool all_linear_ = true;
  Vector last_inner_;
  long inner_solves_ = 0;
};

/// Verification grid with `per_dim` points per dimension; feeds `visit(u)` for each node.
template<typename Visit>
void for_each_grid_point(const InputBox & box, int per_dim, Visit && visit)
{
  const auto m = box.dim();
  std::vector<int> idx(m, 0);
  Vector u(m);
  while (true) {
    for (int j = 0; j < m; ++j) {
      const double t = per_dim == 1 ? 0.5 : static_cast<double>(idx[j]) / (per_dim - 1);
      u[j] = idx[j] == per_dim - 1 ? box.upper[j] : box.lower[j] + t * (box.upper[j] - box.lower[j]);
    }
    visit(u);
    int j = 0;
    while (j < m && ++idx[j] == per_dim) { idx[j++] = 0; }
    if (j == m) { break; }
  }
}

/// Shared fallback when the dual engine fails: best feasible grid node, else the least-violating
/// candidate among the grid and `extra`.
FilterResult fallback_search(const Vector & u_nom, const DualEngine & engine, const InputBox & box,
                             const std::vector<Vector> & extra)
{
  const int m = box.dim();
  const int per_dim = m <= 2 ? 41 : (m == 3 ? 21 : 5);
  FilterResult best_feasible;
  bool have_feasible = false;
  FilterResult least;
  least.margin = -std::numeric_limits<double>::infinity();
  long evals = 0;
  auto consider = [&](const Vector & u) {
    ++evals;
    const double g = worst(engine.margins(u));
    const double d = (u - u_nom).norm();
    if (g >= 0.0 && (!have_feasible || d < best_feasible.objective)) {
      have_feasible = true;
      best_feasible.u = u;
      best_feasible.margin = g;
      best_feasible.objective = d;
    }
    if (g > least.margin || (g == least.margin && d < least.objective)) {
      least.u = u;
      least.margin = g;
      least.objective = d;
    }
  };
  for_each_grid_point(box, per_dim, consider);
  for (const auto & u : extra) { consider(project_box(u, box)); }
  FilterResult out = have_feasible ? best_feasible : least;
  out.status = have_feasible ? FilterStatus::feasible_suboptimal : FilterStatus::infeasible;
  out.stats.evaluations = evals;
  return out;
}

FilterResult solve_concave(const Vector & u_nom, std::vector<ConcaveConstraint> cons, const InputBox & box)
{
  const auto start = Clock::now();
  if (u_nom.size() != box.dim()) { throw std::invalid_argument("solver: u_nom and box sizes differ"); }
  DualEngine engine(u_nom, std::move(cons), box);
  const Vector u0 = project_box(u_nom, box);
  const Vector g0 = engine.margins(u0);
  FilterResult out;
  if (worst(g0) >= 0.0) {
    out.u = u0;
    out.margin = worst(g0);
    out.objective = (u0 - u_nom).norm();
    out.status = FilterStatus::optimal;
    out.stats.evaluations = 1;
    out.stats.wall_time = seconds_since(start);
    return out;
  }
  const DualOutcome dual = engine.solve();
  if (!dual.unbounded && dual.kkt <= kKktTol) {
    out.u = dual.u;
    out.margin = worst(engine.margins(dual.u));
    out.objective = (dual.u - u_nom).norm();
    out.status = FilterStatus::optimal;
  } else {
    out = fallback_search(u_nom, engine, box, {dual.u, u0});
    // a nearly converged dual iterate beats a grid node
    const double g = worst(engine.margins(dual.u));
    if (out.status == FilterStatus::feasible_suboptimal && g >= -kKktTol
        && (dual.u - u_nom).norm() <= out.objective) {
      out.u = dual.u;
      out.margin = g;
      out.objective = (dual.u - u_nom).norm();
    }
  }
  out.stats.iterations = dual.sweeps;
  out.stats.evaluations += dual.inner_solves;
  out.stats.wall_time = seconds_since(start);
  return out;
}

}  // namespace

std::string to_string(FilterStatus status)
{
  switch (status) {
    case FilterStatus::optimal: return "optimal";
    case FilterStatus::feasible_suboptimal: return "feasible_suboptimal";
    case FilterStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

void FilterBackend::validate() const
{
  if (kind == Kind::rk_nonlinear && order != 1 && order != 2 && order != 4) {
    throw std::invalid_argument("FilterBackend: rk_nonlinear order must be 1, 2 or 4");
  }
  if (kind == Kind::sampling && samples < 3) {
    throw std::invalid_argument("FilterBackend: sampling needs at least 3 samples per dimension");
  }
  if (kind == Kind::sampling && sampling_substeps < 1) {
    throw std::invalid_argument("FilterBackend: sampling_substeps must be >= 1");
  }
}

std::string FilterBackend::label() const
{
  switch (kind) {
    case Kind::no_filter: return "no_filter";
    case Kind::linearized_linear: return "linearized_linear";
    case Kind::linearized_quadratic: return "linearized_quadratic";
    case Kind::rk_nonlinear: return "rk_nonlinear(p=" + std::to_string(order) + ")";
    case Kind::sampling: return "sampling(S=" + std::to_string(samples) + ")";
  }
  return "unknown";
}

MarginSet MarginSet::from_list(std::vector<ScalarMap> fns)
{
  MarginSet set;
  set.count = fns.size();
  set.eval = [fns = std::move(fns)](const Vector & u) {
    Vector g(static_cast<Eigen::Index>(fns.size()));
    for (std::size_t i = 0; i < fns.size(); ++i) { g[i] = fns[i](u); }
    return g;
  };
  return set;
}

Vector project_box(const Vector & u, const InputBox & box)
{
  return u.cwiseMax(box.lower).cwiseMin(box.upper);
}

FilterResult solve_qp_halfspace_box(const Vector & u_nom, std::span<const LinearConstraint> constraints,
                                    const InputBox & box)
{
  std::vector<ConcaveConstraint> cons;
  cons.reserve(constraints.size());
  for (const auto & lc : constraints) {
    if (!lc.a.allFinite() || !std::isfinite(lc.b)) {
      throw std::invalid_argument("solve_qp_halfspace_box: non-finite constraint");
    }
    cons.push_back({Matrix(), lc.a, lc.b});
  }
  return solve_concave(u_nom, std::move(cons), box);
}

FilterResult solve_qcqp_box(const Vector & u_nom, std::span<const QuadraticConstraint> quad,
                            std::span<const LinearConstraint> lin, const InputBox & box)
{
  std::vector<ConcaveConstraint> cons;
  for (const auto & qc : quad) { cons.push_back({qc.Q, qc.q, qc.c}); }
  for (const auto & lc : lin) { cons.push_back({Matrix(), lc.a, lc.b}); }
  const Vector u0 = project_box(u_nom, box);
  bool nominal_ok = true;
  for (const auto & c : cons) { nominal_ok = nominal_ok && c(u0) >= 0.0; }
  if (!nominal_ok) {
    for (const auto & qc : quad) {
      const Matrix Qs = 0.5 * (qc.Q + qc.Q.transpose());
      const double top = Eigen::SelfAdjointEigenSolver<Matrix>(Qs, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
      if (top > 1e-8) {
        std::ostringstream os;
        os << "solve_qcqp_box: quadratic constraint is not concave (eigenvalue " << top
           << "); use the rk_nonlinear backend";
        throw NonconvexityError(os.str());
      }
    }
  }
  for (auto & c : cons) {
    if (!c.is_linear() && c.Q.isZero(0.0)) { c.Q = Matrix(); }
  }
  return solve_concave(u_nom, std::move(cons), box);
}

namespace {

struct SqpRun
{
  Vector u;
  Vector g;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
};

SqpRun sqp_from(const Vector & start, const Vector & u_nom, const MarginSet & margins,
                const InputBox & box, const SqpOptions & opts)
{
  SqpRun run;
  run.u = project_box(start, box);
  run.g = margins.eval(run.u);
  ++run.evaluations;
  const double diag = box.diagonal();
  double radius = std::max(opts.initial_radius_fraction * diag, 1e-12);
  double mu = 1.0;
  const auto m = run.u.size();
  const auto k = static_cast<Eigen::Index>(margins.count);

  auto penalty = [&](const Vector & g) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) { s += std::max(0.0, -g[j]); }
    return s;
  };
  auto merit = [&](const Vector & u, const Vector & g) {
    return 0.5 * (u - u_nom).squaredNorm() + mu * penalty(g);
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    run.iterations = it + 1;
    Matrix J(k, m);
    {
      Vector probe = run.u;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double step = 1e-6 * std::max(1.0, std::abs(run.u[i]));
        probe[i] = run.u[i] + step;
        const Vector gp = margins.eval(probe);
        probe[i] = run.u[i] - step;
        const Vector gm = margins.eval(probe);
        probe[i] = run.u[i];
        J.col(i) = (gp - gm) / (2.0 * step);
      }
      run.evaluations += 2 * m;
    }
    std::vector<LinearConstraint> lin;
    lin.reserve(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      lin.push_back({J.row(j).transpose(), run.g[j] - J.row(j).dot(run.u)});
    }
    const InputBox local((run.u.array() - radius).matrix().cwiseMax(box.lower),
                         (run.u.array() + radius).matrix().cwiseMin(box.upper));

    std::vector<ConcaveConstraint> cons;
    for (const auto & lc : lin) { cons.push_back({Matrix(), lc.a, lc.b}); }
    DualEngine engine(u_nom, cons, local);
    Vector trial;
    bool sub_feasible = false;
    if (worst(engine.margins(project_box(u_nom, local))) >= 0.0) {
      trial = project_box(u_nom, local);
      sub_feasible = true;
    } else {
      const DualOutcome dual = engine.solve();
      if (!dual.unbounded && dual.kkt <= 1e-9) {
        trial = dual.u;
        sub_feasible = true;
        mu = std::max(mu, 1.1 * dual.lambda.maxCoeff() + 1e-3);
      } else {
        trial = fallback_search(u_nom, engine, local, {dual.u}).u;
      }
    }
    const Vector d = trial - run.u;
    const double dnorm = d.lpNorm<Eigen::Infinity>();
    const bool feasible = worst(run.g) >= -opts.feasibility_tol;
    if (dnorm <= 1e-11 * (1.0 + run.u.lpNorm<Eigen::Infinity>())) {
      run.converged = feasible && sub_feasible;
      break;
    }
    Vector g_model(k);
    for (Eigen::Index j = 0; j < k; ++j) { g_model[j] = run.g[j] + J.row(j).dot(d); }
    // With an infeasible local model the step only restores feasibility and is judged on the
    // violation alone; the objective would otherwise outweigh any fixed penalty weight.
    const bool restoration = !sub_feasible;
    const double m0 = restoration ? penalty(run.g) : merit(run.u, run.g);
    const double m_model =
      restoration ? penalty(g_model) : 0.5 * (trial - u_nom).squaredNorm() + mu * penalty(g_model);
    const double pred = m0 - m_model;
    if (pred <= 1e-15 * (1.0 + m0)) {
      run.converged = feasible && sub_feasible;
      break;
    }
    const Vector g_trial = margins.eval(trial);
    ++run.evaluations;
    const double ared = m0 - (restoration ? penalty(g_trial) : merit(trial, g_trial));
    const double rho = ared / pred;
    if (rho >= 0.1) {
      run.u = trial;
      run.g = g_trial;
    }
    if (rho < 0.25) {
      radius = 0.5 * dnorm;
    } else if (rho > 0.75 && dnorm >= 0.99 * radius) {
      radius = std::min(2.0 * radius, std::max(diag, 1e-12));
    }
    if (radius < 1e-12) {
      run.converged = worst(run.g) >= -opts.feasibility_tol;
      break;
    }
  }
  return run;
}

}  // namespace

FilterResult solve_sqp_box(const Vector & u_nom, const MarginSet & margins, const InputBox & box,
                           const SqpOptions & opts)
{
  const auto start = Clock::now();
  if (u_nom.size() != box.dim()) { throw std::invalid_argument("solve_sqp_box: u_nom and box sizes differ"); }
  FilterResult out;
  const Vector u0 = project_box(u_nom, box);
  const Vector g0 = margins.eval(u0);
  if (worst(g0) >= 0.0) {
    out.u = u0;
    out.margin = worst(g0);
    out.objective = (u0 - u_nom).norm();
    out.status = FilterStatus::optimal;
    out.stats.evaluations = 1;
    out.stats.wall_time = seconds_since(start);
    return out;
  }

  std::vector<Vector> starts{u0};
  if (opts.warm_start) { starts.push_back(*opts.warm_start); }
  starts.push_back(0.5 * (box.lower + box.upper));

  bool have = false;
  SqpRun best;
  bool best_feasible = false;
  long evals = 1;
  int iters = 0;
  for (const auto & s : starts) {
    SqpRun run = sqp_from(s, u_nom, margins, box, opts);
    evals += run.evaluations;
    iters += run.iterations;
    const bool feasible = worst(run.g) >= -opts.feasibility_tol;
    const double obj = (run.u - u_nom).norm();
    const bool better = !have || (feasible && !best_feasible)
                     || (feasible && best_feasible && obj < (best.u - u_nom).norm())
                     || (!feasible && !best_feasible && worst(run.g) > worst(best.g));
    if (better) {
      best = run;
      best_feasible = feasible;
      have = true;
    }
    if (feasible && run.converged) { break; }
  }
  out.u = best.u;
  out.margin = worst(best.g);
  out.objective = (best.u - u_nom).norm();
  out.status = best_feasible ? (best.converged ? FilterStatus::optimal : FilterStatus::feasible_suboptimal)
                             : FilterStatus::infeasible;
  out.stats.iterations = iters;
  out.stats.evaluations = evals;
  out.stats.wall_time = seconds_since(start);
  return out;
}

int default_worker_count()
{
  if (const char * env = std::getenv("ZOCBF_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) { return n; }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

FilterResult solve_sampling(const Vector & u_nom, const MarginSet & margins, const InputBox & box,
                            int samples, int workers)
{
  const auto start = Clock::now();
  const int m = box.dim();
  if (samples < 3) { throw std::invalid_argument("solve_sampling: samples must be >= 3"); }
  if (m > 3) { throw std::invalid_argument("solve_sampling: at most 3 input dimensions"); }
  if (u_nom.size() != m) { throw std::invalid_argument("solve_sampling: u_nom and box sizes differ"); }

  std::vector<Vector> candidates;
  std::size_t total = 1;
  for (int j = 0; j < m; ++j) { total *= static_cast<std::size_t>(samples); }
  candidates.reserve(total + 1);
  for_each_grid_point(box, samples, [&](const Vector & u) { candidates.push_back(u); });
  candidates.push_back(project_box(u_nom, box));

  std::vector<double> worst_margin(candidates.size());
  const int pool = std::max(1, std::min(workers > 0 ? workers : default_worker_count(),
                                        static_cast<int>(candidates.size() / 256 + 1)));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) { worst_margin[i] = worst(margins.eval(candidates[i])); }
  };
  if (pool == 1) {
    work(0, candidates.size());
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(pool);
    const std::size_t chunk = (candidates.size() + pool - 1) / pool;
    for (int t = 0; t < pool; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(candidates.size(), b + chunk);
      threads.emplace_back([&, t, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto & th : threads) { th.join(); }
    for (const auto & err : errors) {
      if (err) { std::rethrow_exception(err); }
    }
  }

  std::size_t best = candidates.size();
  double best_dist = 0.0;
  std::size_t least = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = (candidates[i] - u_nom).norm();
    if (worst_margin[i] >= 0.0) {
      if (best == candidates.size() || d < best_dist
          || (d == best_dist && lex_less(candidates[i], candidates[best]))) {
        best = i;
        best_dist = d;
      }
    }
    const double dl = (candidates[least] - u_nom).norm();
    if (worst_margin[i] > worst_margin[least]
        || (worst_margin[i] == worst_margin[least]
            && (d < dl || (d == dl && lex_less(candidates[i], candidates[least]))))) {
      least = i;
    }
  }

  FilterResult out;
  const std::size_t pick = best == candidates.size() ? least : best;
  out.u = candidates[pick];
  out.margin = worst_margin[pick];
  out.objective = (out.u - u_nom).norm();
  out.status = best == candidates.size() ? FilterStatus::infeasible : FilterStatus::optimal;
  out.stats.iterations = 1;
  out.stats.evaluations = static_cast<long>(candidates.size());
  out.stats.wall_time = seconds_since(start);
  return out;
}

MarginSet make_margin_set(const ControlAffineSystem & sys, std::span<const ConstraintFunction> hs,
                          const ZocbfParams & params, const Vector & x_k, const Vector & u_prev,
                          const FlowChoice & flow)
{
  std::vector<ConstraintFunction> funcs(hs.begin(), hs.end());
  Vector levels(static_cast<Eigen::Index>(funcs.size()));
  for (std::size_t i = 0; i < funcs.size(); ++i) { levels[i] = required_level(params, funcs[i](x_k, u_prev)); }
  MarginSet set;
  set.count = funcs.size();
  set.eval = [sys, funcs = std::move(funcs), levels, params, x_k, flow](const Vector & u) {
    const Vector next = predict_state(sys, x_k, u, params.T, flow);
    Vector g(levels.size());
    for (Eigen::Index i = 0; i < levels.size(); ++i) { g[i] = funcs[i](next, u) - levels[i]; }
    return g;
  };
  return set;
}

FilterResult safety_filter_step(const FilterBackend & backend, const ControlAffineSystem & sys,
                                std::span<const ConstraintFunction> hs, const ZocbfParams & params,
                                const Vector & x_k, const Vector & u_prev, const Vector & u_nom,
                                const InputBox & box, const FilterContext & ctx)
{
  const auto start = Clock::now();
  backend.validate();
  if (x_k.size() != sys.n || u_prev.size() != sys.m || u_nom.size() != sys.m || box.dim() != sys.m) {
    throw std::invalid_argument("safety_filter_step: inconsistent dimensions");
  }
  FilterResult out;
  switch (backend.kind) {
    case FilterBackend::Kind::no_filter: {
      const MarginSet set = make_margin_set(sys, hs, params, x_k, u_prev, ReferenceFlow{});
      out.u = project_box(u_nom, box);
      out.margin = worst(set.eval(out.u));
      out.objective = (out.u - u_nom).norm();
      out.status = out.margin >= -1e-6 ? FilterStatus::optimal : FilterStatus::infeasible;
      out.stats.evaluations = 1;
      break;
    }
    case FilterBackend::Kind::linearized_linear: {
      const AffineModel model = affine_model(sys, x_k);
      const DiscreteModel dm = discretize(model, params.T);
      std::vector<LinearConstraint> lin;
      for (const auto & h : hs) { lin.push_back(linear_constraint(h, dm, model, params, x_k, u_prev)); }
      out = solve_qp_halfspace_box(u_nom, lin, box);
      break;
    }
    case FilterBackend::Kind::linearized_quadratic: {
      const AffineModel model = affine_model(sys, x_k);
      const DiscreteModel dm = discretize(model, params.T);
      std::vector<QuadraticConstraint> quad;
      for (const auto & h : hs) {
        quad.push_back(quadratic_constraint(h, dm, model, params, x_k, u_prev, backend.curvature));
      }
      out = solve_qcqp_box(u_nom, quad, {}, box);
      break;
    }
    case FilterBackend::Kind::rk_nonlinear: {
      const MarginSet set =
        make_margin_set(sys, hs, params, x_k, u_prev, RungeKuttaFlow{ButcherTableau::of_order(backend.order)});
      SqpOptions opts;
      opts.warm_start = ctx.warm_start ? ctx.warm_start : std::optional<Vector>(u_prev);
      out = solve_sqp_box(u_nom, set, box, opts);
      break;
    }
    case FilterBackend::Kind::sampling: {
      const MarginSet set =
        make_margin_set(sys, hs, params, x_k, u_prev, ReferenceFlow{backend.sampling_substeps});
      out = solve_sampling(u_nom, set, box, backend.samples, ctx.workers);
      break;
    }
  }
  out.stats.wall_time = seconds_since(start);
  return out;
}

}  // namespace zocbf
