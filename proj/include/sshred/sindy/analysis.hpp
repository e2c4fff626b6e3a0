#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "sshred/core/error.hpp"
#include "sshred/diff/tensor.hpp"

namespace sshred {

struct LinearMode {
  std::complex<double> eigenvalue;  // representative (Im >= 0 for pairs)
  bool oscillatory = false;         // conjugate pair
  double omega = 0.0;               // |Im|, rad per time unit
  double growth = 0.0;              // Re
  double period = std::numeric_limits<double>::infinity();
  double half_life = std::numeric_limits<double>::infinity();      // decaying modes
  double doubling_time = std::numeric_limits<double>::infinity();  // growing modes
};

struct LinearSystemAnalysis {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd eigenvectors;  // columns
  std::vector<LinearMode> modes;  // one per real eigenvalue or conjugate pair, by descending omega

  std::vector<double> frequencies() const {
    std::vector<double> f;
    for (const auto& m : modes)
      if (m.oscillatory) f.push_back(m.omega);
    return f;
  }
};

// Eigen-decomposition of dz/dt = G z with per-mode frequency, growth rate,
// period and half-life / doubling time.
inline LinearSystemAnalysis analyze_linear_system(const Eigen::Ref<const RowMat>& G, double imag_tol = 1e-12) {
  if (G.rows() != G.cols() || G.rows() == 0) throw ShapeError("analyze_linear_system: generator must be square");
  if (!G.allFinite()) throw NumericalError("analyze_linear_system: generator has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success) throw NumericalError("analyze_linear_system: eigensolver did not converge");

  LinearSystemAnalysis out;
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();

  const Eigen::MatrixXcd A = G.cast<std::complex<double>>();
  const double anorm = G.norm();
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    const Eigen::VectorXcd v = out.eigenvectors.col(i);
    const double res = (A * v - out.eigenvalues[i] * v).norm();
    if (res > 1e-8 * std::max(anorm, 1e-300) * v.norm() && res > 1e-14)
      throw NumericalError("analyze_linear_system: eigenpair residual too large");
  }

  const double scale = std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    const auto mu = out.eigenvalues[i];
    const bool complex_pair = std::abs(mu.imag()) > imag_tol * scale;
    if (complex_pair && mu.imag() < 0) continue;  // represented by its conjugate
    LinearMode m;
    m.eigenvalue = complex_pair ? mu : std::complex<double>(mu.real(), 0.0);
    m.oscillatory = complex_pair;
    m.omega = complex_pair ? std::abs(mu.imag()) : 0.0;
    m.growth = mu.real();
    if (complex_pair) m.period = 2.0 * std::numbers::pi / m.omega;
    if (m.growth < 0) m.half_life = std::numbers::ln2 / -m.growth;
    if (m.growth > 0) m.doubling_time = std::numbers::ln2 / m.growth;
    out.modes.push_back(m);
  }
  std::stable_sort(out.modes.begin(), out.modes.end(),
                   [](const LinearMode& a, const LinearMode& b) { return a.omega > b.omega; });
  return out;
}

}  // namespace sshred
