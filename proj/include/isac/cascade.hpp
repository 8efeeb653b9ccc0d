#pragma once

#include "isac/transformer.hpp"

namespace isac {

struct CascadeConfig {
  int nc_phi = 30;  // reduced grid sizes, smaller than the stage-1 grids
  int nc_r = 30;
  int nc_v = 10;
};

/// Registers the cascade learnables: per C-block lambda/mu scalars, small
/// key/value matrices at the reduced sizes, the grid/weight-adaptation
/// networks per dimension, and the sigma network. Adaptation-network output
/// layers start near zero so every refined grid begins collapsed on its
/// stage-1 estimate and the cascade initially reproduces stage 1.
void init_cascade_params(const ModelConfig& model_cfg, const CascadeConfig& cfg,
                         uint64_t seed, ad::ParamStore& store);

struct CascadeBlockTrace {
  ad::Var g_min_phi, g_max_phi;  // dynamic window scalars (angle dimension)
  ad::Var attention;
  ad::Var phi, r, v;  // refined estimates
  ad::Var atom;       // refined atom (unused by later stages, kept in the trace)
  bool degenerate_window = false;  // g_max <= g_min on some dimension
};

struct CascadeForward {
  std::vector<CascadeBlockTrace> blocks;
  RVec phi_values, r_values, v_values;
};

/// grid = (g_max - g_min) * base + g_min + center, with base the fixed
/// uniform grid over [-0.5, 0.5].
ad::Var dynamic_grid(ad::Tape& tape, ad::Var g_min, ad::Var g_max, ad::Var center,
                     ad::Var base, ad::Var ones);

/// Runs one refinement block per stage-1 block: dynamic grids and
/// dictionaries from the stage-1 marginals, adapted small learnable
/// matrices, attention at the reduced sizes over the stage-1 query.
CascadeForward cascade_forward(ad::Tape& tape, const ad::ParamStore& params,
                               const ModelConfig& model_cfg, const CascadeConfig& cfg,
                               const ModelForward& stage1);

/// Stage-2 MAEs reuse the stage-1 relations; total = (stage1 + stage2) / 2.
TapeLoss cascade_loss(ad::Tape& tape, const TapeLoss& stage1, const CascadeForward& fwd,
                      const TargetSet& truth);

}  // namespace isac
