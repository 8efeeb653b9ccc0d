#include "isac/scenario.hpp"

namespace isac {

std::vector<std::string> ScenarioConfig::validate() const {
  require(K > 0 && S > 0 && T > 0, "scenario: K, S, T must be positive");
  require(delta_f_hz > 0 && fc_hz > 0, "scenario: frequencies must be positive");
  require(symbol_duration() >= 1.0 / delta_f_hz, "scenario: cyclic prefix negative");
  require(r_min <= r_max && v_min <= v_max, "scenario: empty target intervals");
  require(M >= 0, "scenario: negative target count");
  std::vector<std::string> warnings;
  const double r_unambiguous = kSpeedOfLight / (2.0 * delta_f_hz);
  if (r_max >= r_unambiguous)
    warnings.push_back("r_max " + std::to_string(r_max) +
                       " m exceeds unambiguous range " +
                       std::to_string(r_unambiguous) + " m");
  return warnings;
}

CVec basis_vector(BasisKind kind, double param, const ScenarioConfig& cfg) {
  switch (kind) {
    case BasisKind::SteeringTx:
    case BasisKind::SteeringRx: {
      CVec a(cfg.K);
      const double c0 = -2.0 * M_PI * cfg.spacing() * std::sin(param) / cfg.wavelength();
      for (int k = 0; k < cfg.K; ++k) a[k] = std::polar(1.0, c0 * (k + 1));
      return a;
    }
    case BasisKind::Delay: {
      CVec rho(cfg.S);
      const double tau = 2.0 * param / kSpeedOfLight;
      const double c0 = -2.0 * M_PI * cfg.delta_f_hz * tau;
      for (int i = 0; i < cfg.S; ++i) rho[i] = std::polar(1.0, c0 * (i + 1));
      return rho;
    }
    case BasisKind::Doppler: {
      CVec beta(cfg.T);
      const double fd = 2.0 * param * cfg.fc_hz / kSpeedOfLight;
      const double c0 = 2.0 * M_PI * cfg.symbol_duration() * fd;
      for (int k = 0; k < cfg.T; ++k) beta[k] = std::polar(1.0, c0 * (k + 1));
      return beta;
    }
  }
  throw DimensionError("basis_vector: unknown kind");
}

CVec design_beamformer(double phi_min, double phi_max, const ScenarioConfig& cfg,
                       int n_grid) {
  require(n_grid >= cfg.K, "design_beamformer: n_grid must be >= K");
  CMat a_t(n_grid, cfg.K);  // A^T, one steering vector per grid row
  CVec b(n_grid);
  for (int i = 0; i < n_grid; ++i) {
    const double phi = -M_PI / 2.0 + M_PI * double(i) / double(n_grid - 1);
    a_t.row(i) = basis_vector(BasisKind::SteeringTx, phi, cfg).transpose();
    b[i] = (phi >= phi_min && phi <= phi_max) ? 1.0 : 0.0;
  }
  return lstsq(a_t, b).x;
}

CMat gen_symbols(const ScenarioConfig& cfg, uint64_t seed) {
  static const double h = M_SQRT1_2;
  static const cd alphabet[4] = {cd(h, h), cd(h, -h), cd(-h, h), cd(-h, -h)};
  Rng rng(seed);
  CMat y(cfg.S, cfg.T);
  for (int i = 0; i < cfg.S; ++i)
    for (int j = 0; j < cfg.T; ++j) y(i, j) = alphabet[rng.next_u64() & 3];
  return y;
}

Tensor3c synth_echo(const ScenarioConfig& cfg, const TargetSet& targets,
                    const CMat& symbols, const CVec& beamformer, uint64_t noise_seed) {
  require(symbols.rows() == cfg.S && symbols.cols() == cfg.T,
          "synth_echo: symbol matrix shape mismatch");
  require(beamformer.size() == cfg.K, "synth_echo: beamformer length mismatch");
  Tensor3c z(cfg.K, cfg.S, cfg.T);
  CVec a_tx, a_rx, rho, beta;
  for (const TargetTruth& t : targets) {
    a_tx = basis_vector(BasisKind::SteeringTx, t.phi, cfg);
    a_rx = basis_vector(BasisKind::SteeringRx, t.phi, cfg);
    rho = basis_vector(BasisKind::Delay, t.r, cfg);
    beta = basis_vector(BasisKind::Doppler, t.v, cfg);
    const cd gain = t.gamma;  // alpha * (a_tx^T p), precomputed by the sampler
    Eigen::Index p = 0;
    for (int k = 0; k < cfg.K; ++k)
      for (int i = 0; i < cfg.S; ++i) {
        const cd kp = gain * a_rx[k] * rho[i];
        for (int j = 0; j < cfg.T; ++j, ++p)
          z.data[p] += kp * beta[j] * symbols(i, j);
      }
  }
  const double n0 = cfg.noise_power();
  if (n0 > 0.0) {
    Rng rng(noise_seed);
    for (Eigen::Index p = 0; p < z.size(); ++p) z.data[p] += rng.cnormal(n0);
  }
  return z;
}

Tensor3c remove_symbols(const Tensor3c& z, const CMat& symbols) {
  require(z.d1() == symbols.rows() && z.d2() == symbols.cols(),
          "remove_symbols: symbol matrix shape mismatch");
  require(symbols.cwiseAbs().minCoeff() > 0.0, "remove_symbols: zero symbol");
  Tensor3c out = z;
  Eigen::Index p = 0;
  for (Eigen::Index k = 0; k < z.d0(); ++k)
    for (Eigen::Index i = 0; i < z.d1(); ++i)
      for (Eigen::Index j = 0; j < z.d2(); ++j, ++p)
        out.data[p] /= symbols(i, j);
  return out;
}

EchoSample make_sample(const ScenarioConfig& cfg, uint64_t index,
                       const TargetSnapFn* snap) {
  EchoSample sample;
  sample.sample_seed = derive_seed(cfg.master_seed, index);
  Rng rng(sample.sample_seed);

  sample.phi_min = rng.uniform(cfg.phi_min_lo, cfg.phi_min_hi);
  const double phi_max = sample.phi_min + cfg.angle_window;

  sample.truth.resize(cfg.M);
  for (TargetTruth& t : sample.truth) {
    t.phi = rng.uniform(sample.phi_min, phi_max);
    t.r = rng.uniform(cfg.r_min, cfg.r_max);
    t.v = rng.uniform(cfg.v_min, cfg.v_max);
    t.gamma = rng.cnormal(cfg.sigma_s2);  // alpha; beamformer gain applied below
    if (snap && *snap) (*snap)(t, sample.phi_min);
  }

  const CVec p = design_beamformer(sample.phi_min, phi_max, cfg);
  for (TargetTruth& t : sample.truth) {
    const CVec a_tx = basis_vector(BasisKind::SteeringTx, t.phi, cfg);
    t.gamma *= cd(a_tx.transpose() * p);
  }

  const CMat y = gen_symbols(cfg, derive_seed(sample.sample_seed, 2));
  const Tensor3c z =
      synth_echo(cfg, sample.truth, y, p, derive_seed(sample.sample_seed, 1));
  sample.z_hat = remove_symbols(z, y);
  return sample;
}

std::vector<EchoSample> sample_dataset(const ScenarioConfig& cfg, int n) {
  require(n >= 1, "sample_dataset: need at least one sample");
  std::vector<EchoSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(make_sample(cfg, uint64_t(i)));
  return out;
}

}  // namespace isac
