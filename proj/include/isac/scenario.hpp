#pragma once

#include "isac/rng.hpp"
#include "isac/tensor.hpp"
#include "isac/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace isac {

/// Physical and sampling configuration of the ISAC scene.
/// Angles are radians internally; the CLI converts from degrees.
struct ScenarioConfig {
  int K = 8;    // antennas
  int S = 32;   // subcarriers
  int T = 8;    // OFDM symbols

  double fc_hz = 60e9;
  double delta_f_hz = 120e3;
  double cp_s = 1.5e-6;           // cyclic prefix, Delta_T = 1/delta_f + cp
  double sigma_s2 = 1.0;          // target gain variance
  double snr_db = 10.0;
  bool noiseless = false;

  double r_min = 0.0, r_max = 200.0;        // m
  double v_min = 0.0, v_max = 42.0;         // m/s
  double angle_window = 40.0 * M_PI / 180.0;
  double phi_min_lo = -90.0 * M_PI / 180.0;  // phi_min sampling interval
  double phi_min_hi = 50.0 * M_PI / 180.0;

  int M = 2;  // targets per sample
  uint64_t master_seed = 1;

  double wavelength() const { return kSpeedOfLight / fc_hz; }
  double spacing() const { return wavelength() / 2.0; }  // d = lambda/2
  double symbol_duration() const { return 1.0 / delta_f_hz + cp_s; }
  double noise_power() const {
    return noiseless ? 0.0 : K * sigma_s2 * std::pow(10.0, -snr_db / 10.0);
  }

  /// Validates structural invariants; returns warnings (non-fatal).
  std::vector<std::string> validate() const;
};

struct TargetTruth {
  double phi = 0.0;  // rad
  double r = 0.0;    // m
  double v = 0.0;    // m/s
  cd gamma{0.0, 0.0};
};

using TargetSet = std::vector<TargetTruth>;

struct EchoSample {
  Tensor3c z_hat;  // [K,S,T] after symbol removal
  TargetSet truth;
  double phi_min = 0.0;
  uint64_t sample_seed = 0;
};

enum class BasisKind { SteeringTx, SteeringRx, Delay, Doppler };

/// Unit-modulus phase vectors: steering over antennas, delay over
/// subcarriers, Doppler over symbols. Index runs 1..N in the exponent.
CVec basis_vector(BasisKind kind, double param, const ScenarioConfig& cfg);

/// Solves min_y ||b - A^T y|| for the transmit beamformer, with b the 0/1
/// pattern over n_grid uniform angles spanning [-pi/2, pi/2].
CVec design_beamformer(double phi_min, double phi_max, const ScenarioConfig& cfg,
                       int n_grid = 181);

/// 4-QAM symbols, uniform over {(+-1 +- j)/sqrt(2)}.
CMat gen_symbols(const ScenarioConfig& cfg, uint64_t seed);

/// Reflected signal of all targets plus CN(0, N0) noise.
Tensor3c synth_echo(const ScenarioConfig& cfg, const TargetSet& targets,
                    const CMat& symbols, const CVec& beamformer, uint64_t noise_seed);

/// Z ./ (1 x Y): elementwise symbol removal.
Tensor3c remove_symbols(const Tensor3c& z, const CMat& symbols);

/// Generates one reproducible sample; index keys the per-sample seed.
/// The optional snap hook adjusts each drawn target (e.g. onto a grid)
/// before gains and echoes are formed.
using TargetSnapFn = std::function<void(TargetTruth&, double phi_min)>;
EchoSample make_sample(const ScenarioConfig& cfg, uint64_t index,
                       const TargetSnapFn* snap = nullptr);

std::vector<EchoSample> sample_dataset(const ScenarioConfig& cfg, int n);

}  // namespace isac
