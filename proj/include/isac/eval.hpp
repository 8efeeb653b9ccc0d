#pragma once

#include "isac/cascade.hpp"
#include "isac/config.hpp"
#include "isac/dataset.hpp"

#include <string>
#include <vector>

namespace isac {

/// One detector's estimates for one sample.
struct Detection {
  RVec phi, r, v;
};

/// method: "omp", "transformer", "cascade", "music1d" or "music2d".
/// Learned methods read the parameter store; the others ignore it.
Detection detect(const std::string& method, const EchoSample& sample,
                 const RunConfig& cfg, const ad::ParamStore* params);

struct MethodEval {
  std::string method;
  int targets = 0;
  double snr_db = 0.0;
  bool noiseless = false;
  int n_samples = 0;
  double phi_mae_deg = 0.0;
  double r_mae = 0.0;
  double v_mae = 0.0;
  double seconds = 0.0;
  // matched absolute errors, indexed [match rank][sample]; rank 0 is the
  // closest (most-match) pair of each sample
  std::vector<std::vector<double>> phi_errors_deg, r_errors, v_errors;
};

/// Evaluates one method over the whole dataset (parallel over samples).
MethodEval evaluate_method(const std::string& method, const Dataset& ds,
                           const RunConfig& cfg, const ad::ParamStore* params);

/// eval command outputs: MAE table (CSV + JSON, with the published reference
/// row attached where applicable) and per-dimension CDF files including the
/// per-match-rank breakdown.
void write_eval_outputs(const std::vector<MethodEval>& results, const RunConfig& cfg,
                        const std::string& out_dir);

/// bench command output: wall-clock per method.
void write_bench_csv(const std::vector<MethodEval>& results, const RunConfig& cfg,
                     const std::string& path);

}  // namespace isac
