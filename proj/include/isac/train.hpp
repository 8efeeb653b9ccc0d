#pragma once

#include "isac/cascade.hpp"
#include "isac/config.hpp"
#include "isac/dataset.hpp"

#include <string>
#include <vector>

namespace isac {

struct LossCurvePoint {
  int step = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
};

struct TrainResult {
  double init_heldout = 0.0;
  double final_heldout = 0.0;
  std::vector<LossCurvePoint> curve;
};

/// Adam training of the stage-1 model on the matched-MAE loss. The store
/// must hold the initialized (or pre-trained) parameters and is updated in
/// place. Samples whose seed falls in the held-out partition are never
/// trained on.
TrainResult train_stage1(const Dataset& ds, const RunConfig& cfg,
                         ad::ParamStore& params);

/// Joint training of stage 1 plus the cascade on the combined loss; the
/// store must hold both parameter sets.
TrainResult train_cascade_joint(const Dataset& ds, const RunConfig& cfg,
                                ad::ParamStore& params);

/// Held-out average of the stage-1 loss (or the joint loss with cascade).
double heldout_loss(const Dataset& ds, const RunConfig& cfg,
                    const ad::ParamStore& params, bool with_cascade);

void write_loss_curve(const std::string& path, const std::vector<LossCurvePoint>& curve);

}  // namespace isac
