#include "bsr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace bsr {

namespace {

/// Largest eigenvalue of Phi^T Phi by power iteration, with a small safety
/// margin so 1/L is a valid proximal-gradient step.
double lipschitz_bound(const Eigen::MatrixXd& phi) {
  const int n = static_cast<int>(phi.cols());
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.001 * i;  // break eigenvector symmetry
  v /= v.norm();
  double lam = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = phi.transpose() * (phi * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    const double lam_new = (phi * v).squaredNorm();
    if (std::abs(lam_new - lam) <= 1e-12 * std::max(1.0, lam_new)) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  return lam * 1.02;
}

using ProxFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
using PenaltyFn = std::function<double(const Eigen::VectorXd&)>;
using KktFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Monotone accelerated proximal gradient on 1/2||y - Phi x||^2 + penalty(x).
/// The accepted iterate never increases the objective, so the recorded trace
/// is non-increasing by construction.
SolverResult mfista(const SensingProblem& problem, const SolverOptions& opts,
                    const ProxFn& prox, const PenaltyFn& penalty, const KktFn& kkt) {
  opts.validate();
  const Eigen::MatrixXd& phi = problem.phi;
  const Eigen::VectorXd& y = problem.y;
  const int n = problem.n();

  const double lip = std::max(lipschitz_bound(phi), 1e-12);
  const double step = 1.0 / lip;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = x;
  double t = 1.0;
  double fx = 0.5 * y.squaredNorm() + penalty(x);

  SolverResult result;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const Eigen::VectorXd grad_v = phi.transpose() * (phi * v - y);
    const Eigen::VectorXd z = prox(v - step * grad_v, step);
    const double fz = 0.5 * (y - phi * z).squaredNorm() + penalty(z);

    const Eigen::VectorXd x_old = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    // Adaptive restart: drop the momentum whenever it points against the
    // latest proximal step, which restores linear convergence near the
    // solution without breaking the monotone objective.
    if ((v - z).dot(z - x_old) > 0) {
      t = 1.0;
      v = x;
    } else {
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = x + (t / t_new) * (z - x) + ((t - 1.0) / t_new) * (x - x_old);
      t = t_new;
    }

    result.cost_trace.push_back(fx);
    const Eigen::VectorXd g = phi.transpose() * (y - phi * x);
    if (kkt(x, g) <= opts.convergence_tol) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.x_hat = x;
  result.iterations = iter;
  result.final_cost = fx;
  return result;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& u, double level) {
  return u.unaryExpr([level](double a) {
    const double mag = std::abs(a) - level;
    return mag > 0 ? (a > 0 ? mag : -mag) : 0.0;
  });
}

/// Deciding rho for an epsilon-constrained run: bisection on the (monotone)
/// map rho -> ||y - Phi x_hat(rho)||, accepting a residual within 10% of
/// epsilon.
SolverResult solve_for_epsilon(
    const SensingProblem& problem, const SolverOptions& opts, double rho_max,
    const std::function<SolverResult(double)>& penalized) {
  const double eps = opts.epsilon;
  const double target_lo = 0.9 * eps, target_hi = 1.1 * eps;

  double lo = 0.0, hi = std::max(rho_max, 1e-300);
  SolverResult best = penalized(hi);
  double best_gap = std::abs((problem.y - problem.phi * best.x_hat).norm() - eps);
  for (int step = 0; step < 20; ++step) {
    const double mid = 0.5 * (lo + hi);
    SolverResult r = penalized(mid);
    const double resid = (problem.y - problem.phi * r.x_hat).norm();
    const double gap = std::abs(resid - eps);
    if (gap < best_gap) {
      best = std::move(r);
      best_gap = gap;
      if (resid >= target_lo && resid <= target_hi) return best;
    } else if (resid >= target_lo && resid <= target_hi) {
      return r;
    }
    if (resid > eps)
      hi = mid;
    else
      lo = mid;
  }
  return best;
}

}  // namespace

SolverResult l1_solve_penalized(const SensingProblem& problem, double rho,
                                const SolverOptions& opts) {
  if (rho < 0) throw InvalidInput("l1_solve_penalized: rho < 0");
  return mfista(
      problem, opts,
      [rho](const Eigen::VectorXd& u, double step) {
        return soft_threshold(u, rho * step);
      },
      [rho](const Eigen::VectorXd& x) { return rho * x.lpNorm<1>(); },
      [rho](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        double res = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          double ri;
          if (x[i] > 0)
            ri = std::abs(g[i] - rho);
          else if (x[i] < 0)
            ri = std::abs(g[i] + rho);
          else
            ri = std::max(0.0, std::abs(g[i]) - rho);
          res = std::max(res, ri);
        }
        return res;
      });
}

SolverResult block_l1_solve_penalized(const SensingProblem& problem, double rho,
                                      const SolverOptions& opts) {
  if (rho < 0) throw InvalidInput("block_l1_solve_penalized: rho < 0");
  const BlockPartition& part = problem.partition;
  return mfista(
      problem, opts,
      [rho, &part](const Eigen::VectorXd& u, double step) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
        for (int j = 0; j < part.blocks(); ++j) {
          const auto uj = u.segment(part.offset(j), part.size(j));
          const double nrm = uj.norm();
          const double shrink = nrm - rho * step;
          if (shrink > 0) out.segment(part.offset(j), part.size(j)) = uj * (shrink / nrm);
        }
        return out;
      },
      [rho, &part](const Eigen::VectorXd& x) {
        double p = 0.0;
        for (int j = 0; j < part.blocks(); ++j)
          p += x.segment(part.offset(j), part.size(j)).norm();
        return rho * p;
      },
      [rho, &part](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        double res = 0.0;
        for (int j = 0; j < part.blocks(); ++j) {
          const auto xj = x.segment(part.offset(j), part.size(j));
          const auto gj = g.segment(part.offset(j), part.size(j));
          const double nx = xj.norm();
          const double rj = nx > 0 ? (gj - rho * xj / nx).norm()
                                   : std::max(0.0, gj.norm() - rho);
          res = std::max(res, rj);
        }
        return res;
      });
}

SolverResult l1_solve(const SensingProblem& problem, const SolverOptions& opts) {
  opts.validate();
  const double gy_inf = (problem.phi.transpose() * problem.y).lpNorm<Eigen::Infinity>();
  if (opts.epsilon == 0.0)
    return l1_solve_penalized(problem, 1e-6 * gy_inf, opts);
  if (problem.y.norm() <= opts.epsilon) {
    // x = 0 already meets the residual budget and has minimal norm.
    SolverResult r;
    r.x_hat = Eigen::VectorXd::Zero(problem.n());
    r.converged = true;
    r.final_cost = 0.5 * problem.y.squaredNorm();
    r.cost_trace = {r.final_cost};
    return r;
  }
  return solve_for_epsilon(problem, opts, gy_inf, [&](double rho) {
    return l1_solve_penalized(problem, rho, opts);
  });
}

SolverResult block_l1_solve(const SensingProblem& problem, const SolverOptions& opts) {
  opts.validate();
  const BlockPartition& part = problem.partition;
  const Eigen::VectorXd g = problem.phi.transpose() * problem.y;
  double rho_max = 0.0;
  for (int j = 0; j < part.blocks(); ++j)
    rho_max = std::max(rho_max, g.segment(part.offset(j), part.size(j)).norm());
  if (opts.epsilon == 0.0)
    return block_l1_solve_penalized(problem, 1e-6 * rho_max, opts);
  if (problem.y.norm() <= opts.epsilon) {
    SolverResult r;
    r.x_hat = Eigen::VectorXd::Zero(problem.n());
    r.converged = true;
    r.final_cost = 0.5 * problem.y.squaredNorm();
    r.cost_trace = {r.final_cost};
    return r;
  }
  return solve_for_epsilon(problem, opts, rho_max, [&](double rho) {
    return block_l1_solve_penalized(problem, rho, opts);
  });
}

}  // namespace bsr
