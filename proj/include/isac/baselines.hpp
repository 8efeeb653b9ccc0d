#pragma once

#include "isac/omp3d.hpp"
#include "isac/scenario.hpp"

#include <vector>

namespace isac {

struct MusicConfig {
  int scan_density = 4;           // scan grids = density x the OMP grid sizes
  double smooth_k_ratio = 1.0;    // K_hat / K
  double smooth_s_ratio = 0.6;    // S_hat / S
  bool overlapping_smoothing = false;  // robustness mode, off by default
};

/// 1D MUSIC over the angle dimension: covariance of the (K, S*T) snapshot
/// matrix, noise-subspace spectrum on a dense angle scan, M largest local
/// maxima (peaks reused when fewer than M are found).
std::vector<double> music1d(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                            const GridSet& grids, const MusicConfig& mc);

/// MUSIC pseudo-spectrum values on the angle scan grid (for inspection).
RVec music1d_spectrum(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                      const RVec& scan_angles);

struct RangeVelocity {
  double r = 0.0;
  double v = 0.0;
};

/// Per estimated angle: combine antennas with the conjugate steering vector,
/// then correlate against the delay/Doppler dictionaries and take the argmax.
std::vector<RangeVelocity> matched_filter_rv(const Tensor3c& z_hat,
                                             const std::vector<double>& angles,
                                             const ScenarioConfig& cfg,
                                             const GridSet& grids,
                                             const DictionarySet& dicts);

struct AngleRange {
  double phi = 0.0;
  double r = 0.0;
};

/// Spatially-smoothed 2D MUSIC over angle and range. Snapshots are the
/// non-overlapping (K_hat, S_hat) sub-blocks across all symbols; the
/// steering vector is vec(a(phi)_{:K_hat} (x) rho(r)_{:S_hat}).
std::vector<AngleRange> music2d(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                                const GridSet& grids, const MusicConfig& mc);

/// Velocity for fixed (angle, range): matched filtering restricted to the
/// Doppler dimension.
std::vector<double> matched_filter_velocity(const Tensor3c& z_hat,
                                            const std::vector<AngleRange>& targets,
                                            const ScenarioConfig& cfg,
                                            const GridSet& grids,
                                            const DictionarySet& dicts);

/// Strict local maxima (radius-1 neighborhood, boundaries truncated), sorted
/// by height; indices cycle when fewer than m peaks exist.
std::vector<Eigen::Index> top_peaks_1d(const RVec& f, int m);
std::vector<std::pair<Eigen::Index, Eigen::Index>> top_peaks_2d(const RMat& f, int m);

}  // namespace isac
