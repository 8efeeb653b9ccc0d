#include "isac/baselines.hpp"

#include <algorithm>

namespace isac {

namespace {

RVec linspace(double lo, double hi, int n) {
  RVec g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * double(i) / double(n - 1);
  return g;
}

RVec scan_angles(const GridSet& grids, const MusicConfig& mc) {
  const int n = int(grids.g_phi.size()) * mc.scan_density;
  return linspace(grids.g_phi[0], grids.g_phi[grids.g_phi.size() - 1], n);
}

RVec scan_ranges(const GridSet& grids, const MusicConfig& mc) {
  const int n = int(grids.g_r.size()) * mc.scan_density;
  return linspace(grids.g_r[0], grids.g_r[grids.g_r.size() - 1], n);
}

// 1 / sqrt(q) with the noiseless divergence clipped to a large finite value
double inv_sqrt_clipped(double q) {
  return 1.0 / std::sqrt(std::max(q, 1e-300));
}

}  // namespace

std::vector<Eigen::Index> top_peaks_1d(const RVec& f, int m) {
  std::vector<Eigen::Index> peaks;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const bool left_ok = (i == 0) || f[i] > f[i - 1];
    const bool right_ok = (i == f.size() - 1) || f[i] > f[i + 1];
    if (left_ok && right_ok) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(),
            [&](Eigen::Index a, Eigen::Index b) { return f[a] > f[b]; });
  if (peaks.empty()) {
    Eigen::Index arg = 0;
    f.maxCoeff(&arg);
    peaks.push_back(arg);
  }
  std::vector<Eigen::Index> out;
  for (int i = 0; i < m; ++i) out.push_back(peaks[i % peaks.size()]);
  return out;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> top_peaks_2d(const RMat& f, int m) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> peaks;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      bool is_peak = true;
      for (Eigen::Index di = -1; di <= 1 && is_peak; ++di)
        for (Eigen::Index dj = -1; dj <= 1 && is_peak; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index ii = i + di, jj = j + dj;
          if (ii < 0 || ii >= f.rows() || jj < 0 || jj >= f.cols()) continue;
          if (f(ii, jj) >= f(i, j)) is_peak = false;
        }
      if (is_peak) peaks.emplace_back(i, j);
    }
  std::sort(peaks.begin(), peaks.end(), [&](const auto& a, const auto& b) {
    return f(a.first, a.second) > f(b.first, b.second);
  });
  if (peaks.empty()) {
    Eigen::Index bi = 0, bj = 0;
    f.maxCoeff(&bi, &bj);
    peaks.emplace_back(bi, bj);
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (int i = 0; i < m; ++i) out.push_back(peaks[i % peaks.size()]);
  return out;
}

RVec music1d_spectrum(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                      const RVec& angles) {
  require(m < cfg.K, "music1d: target count must be below the antenna count");
  const CMat snapshots = z_hat.lead_matrix();  // (K, S*T)
  const CMat r = snapshots * snapshots.adjoint();
  const EigResult eig = hermitian_eig(r);
  const CMat noise = eig.eigenvectors.rightCols(cfg.K - m);
  RVec f(angles.size());
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    const CVec a = basis_vector(BasisKind::SteeringRx, angles[i], cfg);
    f[i] = inv_sqrt_clipped((noise.adjoint() * a).squaredNorm());
  }
  return f;
}

std::vector<double> music1d(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                            const GridSet& grids, const MusicConfig& mc) {
  const RVec angles = scan_angles(grids, mc);
  const RVec f = music1d_spectrum(z_hat, m, cfg, angles);
  std::vector<double> out;
  for (Eigen::Index idx : top_peaks_1d(f, m)) out.push_back(angles[idx]);
  return out;
}

std::vector<RangeVelocity> matched_filter_rv(const Tensor3c& z_hat,
                                             const std::vector<double>& angles,
                                             const ScenarioConfig& cfg,
                                             const GridSet& grids,
                                             const DictionarySet& dicts) {
  std::vector<RangeVelocity> out;
  for (double phi : angles) {
    const CVec a = basis_vector(BasisKind::SteeringRx, phi, cfg);
    // spatially combine: y[i,j] = sum_k conj(a[k]) z[k,i,j]
    Tensor3c y(cfg.S, cfg.T, 1);
    MapCRM(y.data.data(), cfg.S * cfg.T, 1).noalias() =
        z_hat.lead_matrix().transpose() * a.conjugate();
    const Tensor3c c1 = contract_first(y, dicts.r_dict.conjugate());   // [T,1,Nr]
    const Tensor3c c2 = contract_first(c1, dicts.v_dict.conjugate());  // [1,Nr,Nv]
    const Tensor3r map = magnitude(c2);
    Eigen::Index best = 0;
    map.data.maxCoeff(&best);
    const Eigen::Index nv = grids.g_v.size();
    out.push_back({grids.g_r[best / nv], grids.g_v[best % nv]});
  }
  return out;
}

std::vector<AngleRange> music2d(const Tensor3c& z_hat, int m, const ScenarioConfig& cfg,
                                const GridSet& grids, const MusicConfig& mc) {
  const int k_hat = std::max(1, int(std::floor(mc.smooth_k_ratio * cfg.K)));
  const int s_hat = std::max(1, int(std::floor(mc.smooth_s_ratio * cfg.S)));
  require(m < k_hat * s_hat, "music2d: target count exceeds the smoothed dimension");

  // snapshot columns from sub-blocks across all symbols
  std::vector<std::pair<int, int>> origins;  // (antenna offset, subcarrier offset)
  if (mc.overlapping_smoothing) {
    for (int bk = 0; bk + k_hat <= cfg.K; ++bk)
      for (int bs = 0; bs + s_hat <= cfg.S; ++bs) origins.emplace_back(bk, bs);
  } else {
    const int nb_k = cfg.K / k_hat, nb_s = cfg.S / s_hat;
    for (int bk = 0; bk < nb_k; ++bk)
      for (int bs = 0; bs < nb_s; ++bs) origins.emplace_back(bk * k_hat, bs * s_hat);
  }
  const Eigen::Index n_snap = Eigen::Index(origins.size()) * cfg.T;
  if (n_snap < 2)
    throw DimensionError(
        "music2d: fewer than 2 snapshots; lower smooth_s_ratio or enable "
        "overlapping smoothing");

  CMat x(k_hat * s_hat, n_snap);
  Eigen::Index col = 0;
  for (const auto& [ok, os] : origins)
    for (int t = 0; t < cfg.T; ++t, ++col)
      for (int kk = 0; kk < k_hat; ++kk)
        for (int ss = 0; ss < s_hat; ++ss)
          x(kk * s_hat + ss, col) = z_hat.at(ok + kk, os + ss, t);

  const CMat r = x * x.adjoint();
  const EigResult eig = hermitian_eig(r);
  const CMat signal = eig.eigenvectors.leftCols(m);  // [K_hat*S_hat, M]

  const RVec angles = scan_angles(grids, mc);
  const RVec ranges = scan_ranges(grids, mc);
  const Eigen::Index na = angles.size(), nr = ranges.size();

  // ||Fn^H s||^2 = ||s||^2 - ||Fs^H s||^2 for the separable steering
  // s = vec(a_{:K_hat} (x) rho_{:S_hat}); contract antennas first.
  CMat a_scan(k_hat, na), rho_scan(s_hat, nr);
  for (Eigen::Index i = 0; i < na; ++i)
    a_scan.col(i) = basis_vector(BasisKind::SteeringRx, angles[i], cfg).head(k_hat);
  for (Eigen::Index j = 0; j < nr; ++j)
    rho_scan.col(j) = basis_vector(BasisKind::Delay, ranges[j], cfg).head(s_hat);

  // each signal column is vec(K_hat x S_hat) with the antenna index slowest,
  // i.e. a row-major (K_hat, S_hat) block
  std::vector<CMat> t1(m);  // per signal vector: [na, s_hat]
  for (int mm = 0; mm < m; ++mm)
    t1[mm] = a_scan.adjoint() *
             MapConstCRM(signal.col(mm).data(), k_hat, s_hat);
  RMat spectrum(na, nr);
  const double s_norm2 = double(k_hat) * double(s_hat);
  CMat b(s_hat, m);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (int mm = 0; mm < m; ++mm) b.col(mm) = t1[mm].row(i).transpose();
    const CMat t2 = rho_scan.adjoint() * b;  // [nr, m]
    for (Eigen::Index j = 0; j < nr; ++j)
      spectrum(i, j) = inv_sqrt_clipped(s_norm2 - t2.row(j).squaredNorm());
  }

  std::vector<AngleRange> out;
  for (const auto& [i, j] : top_peaks_2d(spectrum, m))
    out.push_back({angles[i], ranges[j]});
  return out;
}

std::vector<double> matched_filter_velocity(const Tensor3c& z_hat,
                                            const std::vector<AngleRange>& targets,
                                            const ScenarioConfig& cfg,
                                            const GridSet& grids,
                                            const DictionarySet& dicts) {
  std::vector<double> out;
  for (const AngleRange& t : targets) {
    const CVec a = basis_vector(BasisKind::SteeringRx, t.phi, cfg);
    const CVec rho = basis_vector(BasisKind::Delay, t.r, cfg);
    CVec y = CVec::Zero(cfg.T);
    for (int k = 0; k < cfg.K; ++k)
      for (int i = 0; i < cfg.S; ++i) {
        const cd w = std::conj(a[k] * rho[i]);
        for (int j = 0; j < cfg.T; ++j) y[j] += w * z_hat.at(k, i, j);
      }
    const RVec corr = (dicts.v_dict.adjoint() * y).cwiseAbs();
    Eigen::Index best = 0;
    corr.maxCoeff(&best);
    out.push_back(grids.g_v[best]);
  }
  return out;
}

}  // namespace isac
