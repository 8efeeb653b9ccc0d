#pragma once

#include "isac/baselines.hpp"
#include "isac/cascade.hpp"
#include "isac/scenario.hpp"

#include <map>
#include <string>
#include <vector>

namespace isac {

/// Everything a run needs, assembled from a flat key = value config file
/// plus command-line overrides. Angles are degrees in files and flags,
/// radians internally.
struct RunConfig {
  ScenarioConfig scenario;
  GridConfig grids;
  CascadeConfig cascade;
  MusicConfig music;

  // simulate
  int samples = 500;
  std::string out = "dataset.isacds";
  bool on_grid = false;

  // train / train-cascade
  std::string dataset;
  std::string weights;  // input weights (eval, bench, train-cascade)
  std::string weights_out = "weights.isacwt";
  std::string losscurve_out = "losscurve.csv";
  int steps = 2000;
  int batch = 4;
  int blocks = 2;
  double lr = 1e-4;
  double lr_final = -1.0;  // < 0 means constant lr; cosine decay otherwise
  double heldout_frac = 0.1;
  int eval_every = 50;
  uint64_t init_seed = 1;

  // eval / bench
  std::string out_dir = ".";
  std::string methods = "omp,music1d,music2d";
  bool hard_atoms = false;
  int bench_batch = 2;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
KeyValues read_config_file(const std::string& path);

/// Applies defaults, then file pairs, then override pairs. Unknown keys and
/// malformed values are all collected and reported together.
RunConfig make_run_config(const KeyValues& file_pairs, const KeyValues& overrides);

/// Serializes the resolved configuration as a config file.
std::string serialize_config(const RunConfig& cfg);

}  // namespace isac
