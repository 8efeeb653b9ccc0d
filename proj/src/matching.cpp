#include "isac/matching.hpp"

#include <cmath>

namespace isac {

MatchRelation greedy_match(const RVec& truth, const RVec& estimate) {
  require(truth.size() == estimate.size(), "greedy_match: length mismatch");
  const int m = int(truth.size());
  std::vector<bool> t_used(m, false), e_used(m, false);
  MatchRelation rel;
  rel.pairs.reserve(m);
  for (int round = 0; round < m; ++round) {
    double best = 0.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < m; ++i) {
      if (t_used[i]) continue;
      for (int j = 0; j < m; ++j) {
        if (e_used[j]) continue;
        const double d = std::abs(truth[i] - estimate[j]);
        if (bi < 0 || d < best) {  // strict <: smallest (i, j) wins ties
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    t_used[bi] = true;
    e_used[bj] = true;
    rel.pairs.emplace_back(bi, bj);
  }
  return rel;
}

double matched_mae(const RVec& truth, const RVec& estimate, const MatchRelation& rel) {
  if (rel.pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [i, j] : rel.pairs) sum += std::abs(truth[i] - estimate[j]);
  return sum / double(rel.pairs.size());
}

MatchedLosses mae_losses(const RVec& phi_truth, const RVec& r_truth, const RVec& v_truth,
                         const RVec& phi_est, const RVec& r_est, const RVec& v_est) {
  MatchedLosses out;
  out.angle_rel = greedy_match(phi_truth, phi_est);
  out.range_rel = greedy_match(r_truth, r_est);
  out.velocity_rel = greedy_match(v_truth, v_est);
  out.losses.angle = matched_mae(phi_truth, phi_est, out.angle_rel);
  out.losses.range = matched_mae(r_truth, r_est, out.range_rel);
  out.losses.velocity = matched_mae(v_truth, v_est, out.velocity_rel);
  return out;
}

double cascade_total_loss(const DimensionLosses& stage1, const DimensionLosses& stage2) {
  return 0.5 * (stage1.total() + stage2.total());
}

}  // namespace isac
