#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sshred/core/parallel.hpp"
#include "sshred/core/rng.hpp"
#include "sshred/data/generators.hpp"
#include "sshred/sindy/stlsq.hpp"

namespace sshred {

struct LineFit {
  double slope = 0.0, intercept = 0.0, slope_se = 0.0;
  double ci_low() const { return slope - 1.96 * slope_se; }
  double ci_high() const { return slope + 1.96 * slope_se; }
};

// Ordinary least squares y = a + b x with the standard error of b.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw ShapeError("fit_line: need >= 3 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ShapeError("fit_line: x has no spread");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return f;
}

struct ScalingConfig {
  RowMat system = (RowMat(2, 2) << -0.1, 2.0, -2.0, -0.1).finished();  // dx/dt = A x
  int max_degree = 3;                                                    // p = 10 for d = 2
  std::vector<std::size_t> ns{100, 316, 1000, 3162, 10000, 31623, 100000};
  std::vector<int> degrees{1, 2, 3};  // p sweep at n = p_sweep_n
  std::size_t p_sweep_n = 3162;
  double noise = 0.01;  // the s-doubling check also runs at 2 * noise
  std::size_t trials = 20;
  double horizon = 1.0;
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(2, 0.5);
  double growth_rate = 0.5;  // L for the scalar growth check
  std::uint64_t seed = 7;
};

struct ScalingCell {
  std::size_t n = 0, p = 0;
  double s = 0.0, T = 0.0;
  std::vector<double> coef_error, rollout_error, eig_ratio;  // per trial
  std::size_t ill_conditioned = 0;

  double mean(const std::vector<double>& v) const {
    double a = 0;
    for (double x : v) a += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : a / static_cast<double>(v.size());
  }
  double sd(const std::vector<double>& v) const {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double a = 0;
    for (double x : v) a += (x - m) * (x - m);
    return std::sqrt(a / static_cast<double>(v.size() - 1));
  }
  nlohmann::json to_json() const {
    return {{"n", n},
            {"p", p},
            {"s", s},
            {"T", T},
            {"trials", coef_error.size()},
            {"ill_conditioned", ill_conditioned},
            {"coef_error_mean", mean(coef_error)},
            {"coef_error_sd", sd(coef_error)},
            {"rollout_error_mean", mean(rollout_error)},
            {"eig_ratio_min", eig_ratio.empty() ? 0.0 : *std::min_element(eig_ratio.begin(), eig_ratio.end())}};
  }
};

struct ScalingReport {
  std::vector<ScalingCell> n_cells;        // noise s
  std::vector<ScalingCell> n_cells_2s;     // noise 2s
  std::vector<ScalingCell> p_cells;        // noise s
  double noiseless_max_error = 0.0;
  LineFit slope_n, slope_p;
  double log_ratio_2s = 0.0, log_ratio_2s_se = 0.0;  // pooled log(err(2s) / err(s))
  double eig_ratio_floor = 0.0;                      // smallest lambda_min / n over all trials
  double growth_ratio = 0.0, growth_closed_form = 0.0, growth_exp_lt = 0.0;

  bool slope_in_band(double lo = -0.6, double hi = -0.4) const { return slope_n.slope >= lo && slope_n.slope <= hi; }
  bool linear_in_s() const { return std::abs(log_ratio_2s - std::log(2.0)) <= 1.96 * log_ratio_2s_se; }
  bool passed() const { return slope_in_band() && linear_in_s() && noiseless_max_error < 1e-8; }

  nlohmann::json to_json() const {
    auto cells = [](const std::vector<ScalingCell>& cs) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& c : cs) a.push_back(c.to_json());
      return a;
    };
    return {{"cells_n", cells(n_cells)},
            {"cells_n_2s", cells(n_cells_2s)},
            {"cells_p", cells(p_cells)},
            {"noiseless_max_error", noiseless_max_error},
            {"slope_n", {{"slope", slope_n.slope}, {"ci", {slope_n.ci_low(), slope_n.ci_high()}}}},
            {"slope_p", {{"slope", slope_p.slope}, {"ci", {slope_p.ci_low(), slope_p.ci_high()}}}},
            {"noise_doubling", {{"ratio", std::exp(log_ratio_2s)},
                                {"ci", {std::exp(log_ratio_2s - 1.96 * log_ratio_2s_se),
                                        std::exp(log_ratio_2s + 1.96 * log_ratio_2s_se)}}}},
            {"eig_ratio_floor", eig_ratio_floor},
            {"growth", {{"ratio_2T_over_T", growth_ratio},
                        {"closed_form", growth_closed_form},
                        {"exp_LT", growth_exp_lt}}},
            {"slope_in_band", slope_in_band()},
            {"linear_in_s", linear_in_s()},
            {"passed", passed()}};
  }
};

namespace detail {

// True coefficients of dx/dt = A x in a polynomial library with constant term.
inline RowMat linear_truth(const RowMat& A, const LibrarySpec& spec) {
  RowMat xi = RowMat::Zero(static_cast<Eigen::Index>(library_size(spec)), A.rows());
  for (Eigen::Index j = 0; j < A.rows(); ++j)
    for (Eigen::Index i = 0; i < A.cols(); ++i) xi(1 + i, j) = A(j, i);
  return xi;
}

inline ScalingCell run_scaling_cell(const ScalingConfig& cfg, std::size_t n, int degree, double s, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(cfg.system.rows());
  const LibrarySpec spec{d, true, degree, {}};
  const RowMat truth = linear_truth(cfg.system, spec);
  ScalingCell cell;
  cell.n = n;
  cell.p = library_size(spec);
  cell.s = s;
  cell.T = cfg.horizon;
  std::vector<double> ce(cfg.trials, -1.0), re(cfg.trials, -1.0), er(cfg.trials, -1.0);
  parallel_for(cfg.trials, [&](std::size_t t) {
    Rng rng(split_seed(seed, t));
    RowMat X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
    RowMat dX = X * cfg.system.transpose();
    for (Eigen::Index i = 0; i < dX.size(); ++i) dX.data()[i] += s * rng.normal();
    const RowMat theta = library_matrix(X, spec);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(theta.transpose() * theta).eigenvalues();
    er[t] = ev.minCoeff() / static_cast<double>(n);
    try {
      const SindyModel fit = fit_stlsq(X, dX, spec, {0.0, 1, 0.0});
      const RowMat xi = fit.coefficients();
      ce[t] = (xi - truth).norm();
      auto f_hat = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return xi.transpose() * evaluate_library(y, spec); };
      auto f = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return cfg.system * y; };
      const RowMat a = integrate_rk4(f_hat, cfg.x0, 2, cfg.horizon, 200);
      const RowMat b = integrate_rk4(f, cfg.x0, 2, cfg.horizon, 200);
      re[t] = (a.row(1) - b.row(1)).norm();
    } catch (const ConditioningError&) {
      ce[t] = -1.0;
    }
  });
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    if (ce[t] < 0.0) {
      ++cell.ill_conditioned;
      continue;
    }
    cell.coef_error.push_back(ce[t]);
    cell.rollout_error.push_back(re[t]);
    cell.eig_ratio.push_back(er[t]);
  }
  return cell;
}

}  // namespace detail

// Rollout-error growth on dz/dt = L z: with the fitted rate L^ the error
// x0 |e^{L^ t} - e^{L t}| satisfies err(2T) / err(T) = e^{L T} (1 + e^{(L^-L) T}),
// i.e. about 2 e^{LT} for small estimation error. Returns {measured, closed form, e^{LT}}.
inline std::array<double, 3> linear_growth_check(double L, double T, double s, std::size_t n, std::uint64_t seed) {
  const LibrarySpec spec{1, false, 1, {}};
  Rng rng(seed);
  RowMat X(static_cast<Eigen::Index>(n), 1), dX(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.uniform(-1.0, 1.0);
    dX(i, 0) = L * X(i, 0) + s * rng.normal();
  }
  const double Lh = fit_stlsq(X, dX, spec, {0.0, 1, 0.0}).coefficients()(0, 0);
  Eigen::VectorXd y0 = Eigen::VectorXd::Ones(1);
  auto f_hat = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return Lh * y; };
  auto f = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return L * y; };
  const RowMat a = integrate_rk4(f_hat, y0, 3, T, 2000);
  const RowMat b = integrate_rk4(f, y0, 3, T, 2000);
  const double e1 = std::abs(a(1, 0) - b(1, 0)), e2 = std::abs(a(2, 0) - b(2, 0));
  return {e2 / e1, std::exp(L * T) * (1.0 + std::exp((Lh - L) * T)), std::exp(L * T)};
}

inline ScalingReport theory_scaling_experiment(const ScalingConfig& cfg) {
  if (cfg.trials < 20) throw ConfigError("theory_scaling_experiment: need at least 20 trials per cell");
  if (cfg.ns.size() < 3) throw ConfigError("theory_scaling_experiment: need at least 3 sample sizes");
  ScalingReport r;
  std::uint64_t cell_id = 0;
  auto next_seed = [&] { return split_seed(cfg.seed, ++cell_id); };
  r.eig_ratio_floor = std::numeric_limits<double>::infinity();

  std::vector<double> lx, ly;
  double lr_sum = 0.0, lr_var = 0.0;
  for (std::size_t n : cfg.ns) {
    ScalingCell c1 = detail::run_scaling_cell(cfg, n, cfg.max_degree, cfg.noise, next_seed());
    ScalingCell c2 = detail::run_scaling_cell(cfg, n, cfg.max_degree, 2.0 * cfg.noise, next_seed());
    ScalingConfig one = cfg;
    one.trials = 1;
    const ScalingCell c0 = detail::run_scaling_cell(one, n, cfg.max_degree, 0.0, next_seed());
    for (double e : c0.coef_error) r.noiseless_max_error = std::max(r.noiseless_max_error, e);
    for (const auto* c : {&c1, &c2})
      for (double e : c->eig_ratio) r.eig_ratio_floor = std::min(r.eig_ratio_floor, e);
    for (double e : c1.coef_error) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(e));
    }
    const double m1 = c1.mean(c1.coef_error), m2 = c2.mean(c2.coef_error);
    lr_sum += std::log(m2 / m1);
    const double v1 = c1.sd(c1.coef_error) / m1, v2 = c2.sd(c2.coef_error) / m2;
    lr_var += v1 * v1 / static_cast<double>(c1.coef_error.size()) + v2 * v2 / static_cast<double>(c2.coef_error.size());
    r.n_cells.push_back(std::move(c1));
    r.n_cells_2s.push_back(std::move(c2));
  }
  const double k = static_cast<double>(cfg.ns.size());
  r.log_ratio_2s = lr_sum / k;
  r.log_ratio_2s_se = std::sqrt(lr_var) / k;
  r.slope_n = fit_line(lx, ly);

  std::vector<double> px, py;
  for (int deg : cfg.degrees) {
    ScalingCell c = detail::run_scaling_cell(cfg, cfg.p_sweep_n, deg, cfg.noise, next_seed());
    for (double e : c.coef_error) {
      px.push_back(std::log(static_cast<double>(c.p)));
      py.push_back(std::log(e));
    }
    r.p_cells.push_back(std::move(c));
  }
  if (cfg.degrees.size() >= 2) r.slope_p = fit_line(px, py);

  const auto g = linear_growth_check(cfg.growth_rate, cfg.horizon, cfg.noise, 1000, next_seed());
  r.growth_ratio = g[0];
  r.growth_closed_form = g[1];
  r.growth_exp_lt = g[2];
  return r;
}

}  // namespace sshred
