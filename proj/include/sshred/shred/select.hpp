#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sshred/shred/model.hpp"
#include "sshred/sindy/cell.hpp"

namespace sshred {

struct Selection {
  std::size_t index = 0;
  SindyModel model;
  std::string equations;
  std::vector<double> rollout_mse;  // per member; +inf when the rollout diverged
};

// Per-element MSE of a rollout from the first latent against the whole sequence.
inline double latent_rollout_mse(const SindyModel& m, const Eigen::Ref<const RowMat>& Z) {
  if (Z.rows() < 2) throw ShapeError("latent_rollout_mse: need at least two latents");
  try {
    const RowMat pred = sindy_rollout(Z.row(0).transpose(), m, static_cast<std::size_t>(Z.rows() - 1));
    const double mse = (pred - Z).squaredNorm() / static_cast<double>(Z.size());
    return std::isfinite(mse) ? mse : std::numeric_limits<double>::infinity();
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Sparsest member whose validation rollout MSE is within `tolerance` (10%) of
// the best member; ties on sparsity go to the lower MSE.
inline std::size_t select_member(const std::vector<double>& mse, const std::vector<std::size_t>& nnz,
                                 double tolerance = 0.10) {
  if (mse.empty() || mse.size() != nnz.size()) throw SelectionError("select_member: bad inputs");
  double best = std::numeric_limits<double>::infinity();
  for (double v : mse) best = std::min(best, v);
  if (!std::isfinite(best)) {
    std::ostringstream os;
    os << "every ensemble member diverged on the validation rollout; per-member MSE:";
    for (std::size_t i = 0; i < mse.size(); ++i) os << " [" << i << "] " << mse[i];
    throw SelectionError(os.str());
  }
  std::size_t pick = mse.size();
  for (std::size_t i = 0; i < mse.size(); ++i) {
    if (!(mse[i] <= best * (1.0 + tolerance))) continue;
    if (pick == mse.size() || nnz[i] < nnz[pick] || (nnz[i] == nnz[pick] && mse[i] < mse[pick])) pick = i;
  }
  return pick;
}

inline Selection select_discovered_model(const ShredModel& model, const Eigen::Ref<const RowMat>& validation_latents) {
  Selection s;
  std::vector<std::size_t> nnz;
  for (const auto& m : model.ensemble.models) {
    s.rollout_mse.push_back(latent_rollout_mse(m, validation_latents));
    nnz.push_back(m.nnz());
  }
  s.index = select_member(s.rollout_mse, nnz);
  s.model = model.ensemble.models[s.index].clone();
  s.equations = equations_text(s.model);
  return s;
}

}  // namespace sshred
