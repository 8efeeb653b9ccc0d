#pragma once

#include "isac/types.hpp"

#include <utility>
#include <vector>

namespace isac {

/// One-to-one pairing of truth and estimate indices, in pairing order
/// (closest pair first).
struct MatchRelation {
  std::vector<std::pair<int, int>> pairs;  // (truth index, estimate index)
};

/// First-match-first-out greedy assignment: repeatedly pairs the globally
/// closest remaining (truth, estimate), ties broken by smallest truth index
/// then smallest estimate index.
MatchRelation greedy_match(const RVec& truth, const RVec& estimate);

/// Mean absolute error over the matched pairs of one dimension.
double matched_mae(const RVec& truth, const RVec& estimate, const MatchRelation& rel);

struct DimensionLosses {
  double angle = 0.0;
  double range = 0.0;
  double velocity = 0.0;
  double total() const { return angle + range + velocity; }
};

struct MatchedLosses {
  DimensionLosses losses;
  MatchRelation angle_rel, range_rel, velocity_rel;
};

/// Per-dimension independent matching (angles on angles, ranges on ranges,
/// velocities on velocities) followed by the MAE of each dimension.
MatchedLosses mae_losses(const RVec& phi_truth, const RVec& r_truth, const RVec& v_truth,
                         const RVec& phi_est, const RVec& r_est, const RVec& v_est);

/// Stage-2 losses reuse the stage-1 relations; total = (stage1 + stage2) / 2.
double cascade_total_loss(const DimensionLosses& stage1, const DimensionLosses& stage2);

}  // namespace isac
