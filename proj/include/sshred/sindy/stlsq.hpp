#pragma once

#include <iostream>
#include <vector>

#include "sshred/sindy/model.hpp"

namespace sshred {

struct StlsqOptions {
  double threshold = 0.1;
  int iters = 10;
  double ridge = 1e-6;
};

namespace detail {

// argmin ||A x - b||^2 + ridge ||x||^2 via QR (no normal equations).
inline Eigen::VectorXd ridge_solve(const RowMat& A, const Eigen::VectorXd& b, double ridge) {
  const Eigen::Index n = A.rows(), p = A.cols();
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < p)
      throw ConditioningError("fit_stlsq: library matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                              " < " + std::to_string(p) + " active terms); use ridge > 0");
    return qr.solve(b);
  }
  Eigen::MatrixXd aug(n + p, p);
  aug.topRows(n) = A;
  aug.bottomRows(p) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
  rhs.head(n) = b;
  return Eigen::HouseholderQR<Eigen::MatrixXd>(aug).solve(rhs);
}

}  // namespace detail

// Sequential thresholded least squares. Each column alternates a ridge fit on
// its active terms with hard thresholding until the support stops changing or
// `iters` rounds have run.
inline SindyModel fit_stlsq(const Eigen::Ref<const RowMat>& Z, const Eigen::Ref<const RowMat>& dZ,
                            const LibrarySpec& spec, const StlsqOptions& opt, double dt = 1.0, int substeps = 1) {
  if (Z.rows() != dZ.rows() || Z.cols() != dZ.cols())
    throw ShapeError("fit_stlsq: states and derivative targets differ in shape");
  if (opt.ridge < 0.0) throw ConfigError("fit_stlsq: ridge must be >= 0");
  if (opt.threshold < 0.0) throw ConfigError("fit_stlsq: threshold must be >= 0");
  const RowMat theta = library_matrix(Z, spec);
  const Eigen::Index n = theta.rows(), p = theta.cols(), d = Z.cols();
  if (n < p)
    std::cerr << "warning: fit_stlsq has " << n << " samples for " << p << " library terms\n";

  RowMat xi = RowMat::Zero(p, d);
  MaskMat mask = MaskMat::Constant(p, d, true);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < p; ++i) active.push_back(i);
    const Eigen::VectorXd target = dZ.col(j);
    Eigen::VectorXd coef;
    bool changed = true;
    for (int it = 0; it < std::max(1, opt.iters) && changed && !active.empty(); ++it) {
      RowMat sub(n, static_cast<Eigen::Index>(active.size()));
      for (std::size_t a = 0; a < active.size(); ++a) sub.col(static_cast<Eigen::Index>(a)) = theta.col(active[a]);
      coef = detail::ridge_solve(sub, target, opt.ridge);
      std::vector<Eigen::Index> keep;
      for (std::size_t a = 0; a < active.size(); ++a)
        if (std::abs(coef[static_cast<Eigen::Index>(a)]) >= opt.threshold) keep.push_back(active[a]);
      changed = keep.size() != active.size();
      if (!changed) break;
      active = std::move(keep);
      coef.resize(0);
    }
    // Support changed on the last allowed round: refit on what survived.
    if (coef.size() != static_cast<Eigen::Index>(active.size()) && !active.empty()) {
      RowMat sub(n, static_cast<Eigen::Index>(active.size()));
      for (std::size_t a = 0; a < active.size(); ++a) sub.col(static_cast<Eigen::Index>(a)) = theta.col(active[a]);
      coef = detail::ridge_solve(sub, target, opt.ridge);
    }
    mask.col(j).setConstant(false);
    for (std::size_t a = 0; a < active.size(); ++a) {
      mask(active[a], j) = true;
      xi(active[a], j) = coef[static_cast<Eigen::Index>(a)];
    }
  }
  SindyModel m(spec, xi, dt, substeps);
  m.mask = mask;
  m.apply_mask();
  return m;
}

// Time derivative of each column: second-order central differences inside,
// second-order one-sided stencils at both ends.
inline RowMat central_difference(const Eigen::Ref<const RowMat>& X, double dt) {
  const Eigen::Index n = X.rows();
  if (n < 3) throw ShapeError("central_difference: need at least 3 samples");
  RowMat D(n, X.cols());
  for (Eigen::Index i = 1; i + 1 < n; ++i) D.row(i) = (X.row(i + 1) - X.row(i - 1)) / (2.0 * dt);
  D.row(0) = (-3.0 * X.row(0) + 4.0 * X.row(1) - X.row(2)) / (2.0 * dt);
  D.row(n - 1) = (3.0 * X.row(n - 1) - 4.0 * X.row(n - 2) + X.row(n - 3)) / (2.0 * dt);
  return D;
}

}  // namespace sshred
