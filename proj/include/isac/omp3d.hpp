#pragma once

#include "isac/scenario.hpp"
#include "isac/tensor.hpp"

#include <optional>
#include <vector>

namespace isac {

struct GridConfig {
  int n_phi = 90;
  int n_r = 60;
  int n_v = 20;
};

struct GridSet {
  RVec g_phi;  // rad
  RVec g_r;    // m
  RVec g_v;    // m/s
};

struct DictionarySet {
  CMat phi_dict;  // [K, N_phi]
  CMat r_dict;    // [S, N_r]
  CMat v_dict;    // [T, N_v]
};

/// Uniform inclusive-endpoint grids over the configured intervals and the
/// matching steering/delay/Doppler dictionaries.
std::pair<GridSet, DictionarySet> build_grids_and_dicts(const ScenarioConfig& cfg,
                                                        const GridConfig& grids,
                                                        double phi_min);

/// Angle-delay-Doppler map |Z ^ Phi_phi* ^ Phi_r* ^ Phi_v*|.
Tensor3r adm_map(const Tensor3c& z_hat, const DictionarySet& dicts);

/// Reusable buffers for repeated map evaluations (conjugated row-major
/// dictionaries plus the contraction intermediates).
struct AdmScratch {
  CMatRM phi_conj, r_conj, v_conj;
  Tensor3c t1, t2, t3;
  Tensor3r map;
  bool primed = false;
  void prime(const DictionarySet& dicts);
};

const Tensor3r& adm_map(const Tensor3c& z_hat, const DictionarySet& dicts,
                        AdmScratch& scratch);

struct OmpStop {
  int max_iterations = 1;               // fixed-M mode (default)
  std::optional<double> threshold;      // delta mode: stop when max map <= delta
};

struct OmpState {
  Tensor3c residual;
  std::vector<Tensor3c> atoms;
  TargetSet estimates;
  CVec gains;
  std::vector<std::array<Eigen::Index, 3>> picks;  // grid indices per iteration
  bool rank_deficient = false;
};

/// Algorithm: per iteration take the map argmax (first occurrence on ties),
/// append the grid estimate and atom, re-solve all gains jointly, update the
/// residual as the orthogonal-projection remainder of the original input.
OmpState run_omp(const Tensor3c& z_hat, const DictionarySet& dicts,
                 const GridSet& grids, const OmpStop& stop);

/// Fixed gain applied to the max-normalized magnitude map before the
/// softmax; shared by the soft reference and the learnable model so both
/// produce identical attention at initialization.
inline constexpr double kAttentionGain = 16.0;

/// softmax(sigma * kAttentionGain * m / max(m)) over all entries.
/// An all-zero map yields the uniform distribution.
RVec attention_weights(const Tensor3r& map, double sigma);

struct SoftIteration {
  RVec attention;        // flattened [N_phi*N_r*N_v], sums to 1
  RVec a_i, a_j, a_k;    // marginals
  double phi, r, v;      // soft estimates
  Tensor3c atom;         // soft atom
};

struct SoftOmpResult {
  TargetSet estimates;
  std::vector<SoftIteration> iterations;
};

/// Softmax-relaxed reference forward pass: attention over the magnitude
/// map, marginal readout against grids/dictionaries, exact orthogonal
/// projection between iterations.
SoftOmpResult soft_omp_forward(const Tensor3c& z_hat, const DictionarySet& dicts,
                               const GridSet& grids, double sigma, int iterations);

}  // namespace isac
