#pragma once

#include "isac/omp3d.hpp"
#include "isac/scenario.hpp"

#include <string>
#include <vector>

namespace isac {

struct Dataset {
  ScenarioConfig config;
  std::vector<EchoSample> samples;
};

/// Binary dataset file: magic + version, a config echo, the sample count,
/// then per-sample records (seed, phi_min, truth triples with gains, raw
/// echo as little-endian float64 pairs).
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

/// Draws n reproducible samples. With a grid config, targets are snapped to
/// the nearest grid point of their sample's grids before echo synthesis
/// (noiseless on-grid scenes for exact-recovery checks).
Dataset generate_dataset(const ScenarioConfig& cfg, int n,
                         const GridConfig* snap_to = nullptr);

/// Deterministic held-out membership by seed partition.
bool is_heldout(const EchoSample& sample, double heldout_frac);

}  // namespace isac
