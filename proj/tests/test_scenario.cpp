#include "doctest.h"

#include "isac/scenario.hpp"

#include <map>

using namespace isac;

namespace {

ScenarioConfig desk_config() {
  ScenarioConfig cfg;
  cfg.K = 8;
  cfg.S = 32;
  cfg.T = 8;
  cfg.M = 2;
  cfg.master_seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("steering vector at zero angle is all ones") {
  const ScenarioConfig cfg = desk_config();
  const CVec a = basis_vector(BasisKind::SteeringRx, 0.0, cfg);
  CHECK((a - CVec::Ones(cfg.K)).norm() < 1e-14);
}

TEST_CASE("delay vector at zero range is all ones") {
  const ScenarioConfig cfg = desk_config();
  const CVec rho = basis_vector(BasisKind::Delay, 0.0, cfg);
  CHECK((rho - CVec::Ones(cfg.S)).norm() < 1e-14);
}

TEST_CASE("steering at 30 degrees with two antennas") {
  ScenarioConfig cfg = desk_config();
  cfg.K = 2;
  const CVec a = basis_vector(BasisKind::SteeringTx, 30.0 * M_PI / 180.0, cfg);
  // sin 30 = 1/2, d = lambda/2: phases -pi/2 and -pi
  CHECK(std::abs(a[0] - cd(0, -1)) < 1e-12);
  CHECK(std::abs(a[1] - cd(-1, 0)) < 1e-12);
}

TEST_CASE("all basis vectors have unit-modulus entries") {
  const ScenarioConfig cfg = desk_config();
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const CVec a = basis_vector(BasisKind::SteeringRx, rng.uniform(-1.4, 1.4), cfg);
    const CVec r = basis_vector(BasisKind::Delay, rng.uniform(0.0, 200.0), cfg);
    const CVec b = basis_vector(BasisKind::Doppler, rng.uniform(0.0, 42.0), cfg);
    CHECK((a.cwiseAbs() - RVec::Ones(cfg.K)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((r.cwiseAbs() - RVec::Ones(cfg.S)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((b.cwiseAbs() - RVec::Ones(cfg.T)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("beamformer recovers a planted solution") {
  const ScenarioConfig cfg = desk_config();
  const int n_grid = 181;
  CMat a_t(n_grid, cfg.K);
  for (int i = 0; i < n_grid; ++i) {
    const double phi = -M_PI / 2.0 + M_PI * double(i) / double(n_grid - 1);
    a_t.row(i) = basis_vector(BasisKind::SteeringTx, phi, cfg).transpose();
  }
  CVec y0(cfg.K);
  Rng rng(11);
  for (int k = 0; k < cfg.K; ++k) y0[k] = rng.cnormal(1.0);
  const CVec b = a_t * y0;
  const LstsqResult res = lstsq(a_t, b);
  CHECK((res.x - y0).norm() <= 1e-9);
  CHECK((b - a_t * res.x).norm() <= 1e-9);
}

TEST_CASE("beamformer concentrates power inside the window") {
  const ScenarioConfig cfg = desk_config();
  const double lo = -10.0 * M_PI / 180.0, hi = 30.0 * M_PI / 180.0;
  const CVec p = design_beamformer(lo, hi, cfg);
  double in_sum = 0, out_sum = 0;
  int in_n = 0, out_n = 0;
  for (int i = 0; i < 181; ++i) {
    const double phi = -M_PI / 2.0 + M_PI * double(i) / 180.0;
    const CVec a = basis_vector(BasisKind::SteeringTx, phi, cfg);
    const double gain = std::abs(cd(a.transpose() * p));
    if (phi >= lo && phi <= hi) {
      in_sum += gain;
      ++in_n;
    } else {
      out_sum += gain;
      ++out_n;
    }
  }
  CHECK(in_sum / in_n > out_sum / out_n);
}

TEST_CASE("full-width beam window is consistent") {
  const ScenarioConfig cfg = desk_config();
  const CVec p = design_beamformer(-M_PI / 2.0, M_PI / 2.0, cfg);
  CHECK(p.allFinite());
}

TEST_CASE("symbols are unit modulus and deterministic") {
  const ScenarioConfig cfg = desk_config();
  const CMat y1 = gen_symbols(cfg, 77);
  const CMat y2 = gen_symbols(cfg, 77);
  CHECK((y1 - y2).norm() == 0.0);
  CHECK((y1.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("symbol constellation frequencies are balanced") {
  ScenarioConfig cfg = desk_config();
  cfg.S = 100;
  cfg.T = 100;  // 10,000 draws
  const CMat y = gen_symbols(cfg, 0);
  std::map<std::pair<bool, bool>, int> counts;
  for (int i = 0; i < cfg.S; ++i)
    for (int j = 0; j < cfg.T; ++j)
      counts[{y(i, j).real() > 0, y(i, j).imag() > 0}]++;
  CHECK(counts.size() == 4);
  for (const auto& [key, n] : counts) {
    const double freq = double(n) / 10000.0;
    CHECK(freq >= 0.2);
    CHECK(freq <= 0.3);
  }
}

TEST_CASE("echo with zero targets and no noise is zero") {
  ScenarioConfig cfg = desk_config();
  cfg.noiseless = true;
  const CMat y = gen_symbols(cfg, 1);
  const CVec p = CVec::Ones(cfg.K);
  const Tensor3c z = synth_echo(cfg, {}, y, p, 2);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("single-target noiseless echo matches the direct formula") {
  ScenarioConfig cfg = desk_config();
  cfg.noiseless = true;
  TargetTruth t;
  t.phi = 0.2;
  t.r = 57.0;
  t.v = 13.0;
  CVec p = CVec::Zero(cfg.K);
  p[0] = cd(1, 0);  // e_1 beamformer
  const CVec a_tx = basis_vector(BasisKind::SteeringTx, t.phi, cfg);
  const cd alpha(0.8, -0.5);
  t.gamma = alpha * cd(a_tx.transpose() * p);

  const CMat y = gen_symbols(cfg, 5);
  const Tensor3c z = synth_echo(cfg, {t}, y, p, 6);

  const CVec a_rx = basis_vector(BasisKind::SteeringRx, t.phi, cfg);
  const CVec rho = basis_vector(BasisKind::Delay, t.r, cfg);
  const CVec beta = basis_vector(BasisKind::Doppler, t.v, cfg);
  double max_err = 0;
  for (int k = 0; k < cfg.K; ++k)
    for (int i = 0; i < cfg.S; ++i)
      for (int j = 0; j < cfg.T; ++j) {
        const cd ref = t.gamma * a_rx[k] * rho[i] * beta[j] * y(i, j);
        max_err = std::max(max_err, std::abs(z.at(k, i, j) - ref));
      }
  CHECK(max_err < 1e-12);
}

TEST_CASE("echo is linear in the targets for a shared noise draw") {
  ScenarioConfig cfg = desk_config();
  const CMat y = gen_symbols(cfg, 7);
  const CVec p = design_beamformer(0.0, cfg.angle_window, cfg);
  Rng rng(8);
  TargetTruth t1{0.1, 30.0, 5.0, rng.cnormal(1.0)};
  TargetTruth t2{0.4, 120.0, 33.0, rng.cnormal(1.0)};
  const Tensor3c z12 = synth_echo(cfg, {t1, t2}, y, p, 9);
  const Tensor3c z1 = synth_echo(cfg, {t1}, y, p, 9);
  const Tensor3c z2 = synth_echo(cfg, {t2}, y, p, 9);
  const Tensor3c noise = synth_echo(cfg, {}, y, p, 9);
  const CVec lhs = z12.data;
  const CVec rhs = z1.data + z2.data - noise.data;
  CHECK((lhs - rhs).norm() < 1e-12 * lhs.norm());
}

TEST_CASE("remove_symbols divides out the symbol matrix") {
  ScenarioConfig cfg = desk_config();
  const CMat y = gen_symbols(cfg, 12);
  Tensor3c z(cfg.K, cfg.S, cfg.T);
  for (int k = 0; k < cfg.K; ++k)
    for (int i = 0; i < cfg.S; ++i)
      for (int j = 0; j < cfg.T; ++j) z.at(k, i, j) = y(i, j);
  const Tensor3c zh = remove_symbols(z, y);
  CHECK((zh.data - CVec::Ones(zh.size())).norm() < 1e-13);
}

TEST_CASE("remove_symbols inverts multiplication by the symbols") {
  ScenarioConfig cfg = desk_config();
  const CMat y = gen_symbols(cfg, 13);
  Tensor3c z(cfg.K, cfg.S, cfg.T);
  Rng rng(14);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data[i] = rng.cnormal(1.0);
  Tensor3c zy = z;
  for (int k = 0; k < cfg.K; ++k)
    for (int i = 0; i < cfg.S; ++i)
      for (int j = 0; j < cfg.T; ++j) zy.at(k, i, j) *= y(i, j);
  const Tensor3c back = remove_symbols(zy, y);
  CHECK((back.data - z.data).norm() < 1e-13 * z.data.norm());
}

TEST_CASE("noiseless single-target sample is a rank-1 triple outer product") {
  ScenarioConfig cfg = desk_config();
  cfg.noiseless = true;
  cfg.M = 1;
  const EchoSample s = make_sample(cfg, 0);
  const TargetTruth& t = s.truth[0];
  const Tensor3c ref = outer3(basis_vector(BasisKind::SteeringRx, t.phi, cfg),
                              basis_vector(BasisKind::Delay, t.r, cfg),
                              basis_vector(BasisKind::Doppler, t.v, cfg));
  CHECK((s.z_hat.data - t.gamma * ref.data).norm() < 1e-12 * s.z_hat.norm());
}

TEST_CASE("samples are reproducible from (master seed, index)") {
  const ScenarioConfig cfg = desk_config();
  const EchoSample a = make_sample(cfg, 17);
  const EchoSample b = make_sample(cfg, 17);
  CHECK(a.sample_seed == b.sample_seed);
  CHECK((a.z_hat.data - b.z_hat.data).norm() == 0.0);
  CHECK(a.phi_min == b.phi_min);
  for (size_t i = 0; i < a.truth.size(); ++i) {
    CHECK(a.truth[i].phi == b.truth[i].phi);
    CHECK(a.truth[i].gamma == b.truth[i].gamma);
  }
}

TEST_CASE("sampled angles stay inside the per-sample window") {
  ScenarioConfig cfg = desk_config();
  cfg.M = 3;
  for (int i = 0; i < 50; ++i) {
    const EchoSample s = make_sample(cfg, uint64_t(i));
    for (const TargetTruth& t : s.truth) {
      CHECK(t.phi >= s.phi_min);
      CHECK(t.phi <= s.phi_min + cfg.angle_window);
    }
  }
}

TEST_CASE("sampled ranges are uniform over the configured interval") {
  ScenarioConfig cfg = desk_config();
  cfg.M = 1;
  cfg.noiseless = true;
  cfg.K = 1;
  cfg.S = 1;
  cfg.T = 1;  // keep the echo tiny, only the truth values matter here
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += make_sample(cfg, uint64_t(i)).truth[0].r;
  const double mid = (cfg.r_min + cfg.r_max) / 2.0;
  CHECK(std::abs(sum / n - mid) < 0.02 * mid);
}

TEST_CASE("noise power calibrates to the configured SNR") {
  ScenarioConfig cfg = desk_config();
  cfg.snr_db = 10.0;
  const double n0 = cfg.noise_power();
  Rng rng(20250601);
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) acc += std::norm(rng.cnormal(n0));
  const double snr_est = 10.0 * std::log10(cfg.K * cfg.sigma_s2 / (acc / n));
  CHECK(std::abs(snr_est - cfg.snr_db) < 0.2);
}

TEST_CASE("config validation reports ambiguous range") {
  ScenarioConfig cfg = desk_config();
  cfg.r_max = 2000.0;  // beyond c / (2 delta_f) ~ 1249 m
  CHECK_FALSE(cfg.validate().empty());
  cfg.r_max = 200.0;
  CHECK(cfg.validate().empty());
}
