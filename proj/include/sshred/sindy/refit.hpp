#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "sshred/sindy/cell.hpp"
#include "sshred/sindy/stlsq.hpp"

namespace sshred {

// One cell step applied to every row of Z, with explicit coefficients.
inline RowMat sindy_advance(const Eigen::Ref<const RowMat>& Z, const SindyModel& m, const RowMat& xi) {
  RowMat cur = Z;
  const double h = m.step_size();
  for (int i = 0; i < m.substeps; ++i) cur += h * (library_matrix(cur, m.spec) * xi);
  return cur;
}

// Stacked residuals z_{t+s} - cell^s(z_t), s = 1..horizon, over a latent
// sequence Z (rows in time order), for starts t = 0, stride, 2 stride, ...
// that leave room for the whole horizon.
inline Eigen::VectorXd rollout_residuals(const Eigen::Ref<const RowMat>& Z, const SindyModel& m, const RowMat& xi,
                                         std::size_t horizon, std::size_t stride = 1) {
  const Eigen::Index T = Z.rows(), d = Z.cols();
  const auto H = static_cast<Eigen::Index>(horizon);
  if (H < 1 || T <= H) throw ShapeError("rollout_residuals: sequence too short for the horizon");
  if (stride == 0) throw ConfigError("rollout_residuals: stride must be positive");
  std::vector<Eigen::Index> starts;
  for (Eigen::Index t = 0; t + H < T; t += static_cast<Eigen::Index>(stride)) starts.push_back(t);
  const auto n = static_cast<Eigen::Index>(starts.size());
  RowMat pred(n, d);
  for (Eigen::Index i = 0; i < n; ++i) pred.row(i) = Z.row(starts[static_cast<std::size_t>(i)]);
  Eigen::VectorXd r(n * d * H);
  Eigen::Index off = 0;
  for (Eigen::Index s = 1; s <= H; ++s) {
    pred = sindy_advance(pred, m, xi);
    for (Eigen::Index i = 0; i < n; ++i, off += d)
      r.segment(off, d) = (Z.row(starts[static_cast<std::size_t>(i)] + s) - pred.row(i)).transpose();
  }
  return r;
}

struct RefitOptions {
  int iters = 5;
  double ridge = 1e-6;
  std::size_t horizon = 1;
  std::size_t stride = 1;
};

// Gauss-Newton on the active coefficients of `m`, minimising the mean squared
// s-step rollout error (s = 1..horizon) over Z. Jacobian by central
// differences, columns scaled to unit norm before the ridge solve. A step is
// only taken if it lowers the loss. Returns the loss.
inline double refit_rollout(SindyModel& m, const Eigen::Ref<const RowMat>& Z, const RefitOptions& opt = {}) {
  auto residuals = [&](const RowMat& xi) { return rollout_residuals(Z, m, xi, opt.horizon, opt.stride); };
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m.mask.size(); ++i)
    if (m.mask.data()[i]) active.push_back(i);
  RowMat xi = m.coefficients();
  auto loss_of = [&](const Eigen::VectorXd& r) {
    const double v = r.squaredNorm() / static_cast<double>(r.size());
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  Eigen::VectorXd r = residuals(xi);
  double loss = loss_of(r);
  if (active.empty()) return loss;
  if (!std::isfinite(loss) && opt.horizon > 1) {
    // Long rollouts from the current coefficients blow up: settle the one-step
    // fit first.
    RefitOptions one = opt;
    one.horizon = one.stride = 1;
    refit_rollout(m, Z, one);
    xi = m.coefficients();
    r = residuals(xi);
    loss = loss_of(r);
  }
  if (!std::isfinite(loss)) return loss;

  const auto na = static_cast<Eigen::Index>(active.size());
  for (int it = 0; it < opt.iters; ++it) {
    RowMat J(r.size(), na);
    for (Eigen::Index a = 0; a < na; ++a) {
      const Eigen::Index k = active[static_cast<std::size_t>(a)];
      const double orig = xi.data()[k];
      const double eps = 1e-6 * std::max(1.0, std::abs(orig));
      xi.data()[k] = orig + eps;
      const Eigen::VectorXd rp = residuals(xi);
      xi.data()[k] = orig - eps;
      const Eigen::VectorXd rm = residuals(xi);
      xi.data()[k] = orig;
      J.col(a) = (rp - rm) / (2.0 * eps);
    }
    if (!J.allFinite()) break;
    // Unit-norm columns so the ridge is relative to each coefficient's scale.
    Eigen::VectorXd scale = J.colwise().norm().transpose();
    for (Eigen::Index a = 0; a < na; ++a)
      if (scale[a] == 0.0) scale[a] = 1.0;
    const RowMat Js = J * scale.cwiseInverse().asDiagonal();
    const Eigen::VectorXd delta = detail::ridge_solve(Js, -r, opt.ridge).cwiseQuotient(scale);
    bool improved = false;
    for (double t = 1.0; t > 1e-3; t *= 0.5) {
      RowMat trial = xi;
      for (Eigen::Index a = 0; a < na; ++a) trial.data()[active[static_cast<std::size_t>(a)]] += t * delta[a];
      const Eigen::VectorXd rt = residuals(trial);
      const double lt = loss_of(rt);
      if (lt < loss) {
        xi = trial;
        r = rt;
        improved = loss - lt > 1e-12 * loss;
        loss = lt;
        break;
      }
    }
    if (!improved) break;
  }
  m.set_coefficients(xi);
  return loss;
}

}  // namespace sshred
