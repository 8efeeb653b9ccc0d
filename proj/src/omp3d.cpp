#include "isac/omp3d.hpp"

namespace isac {

namespace {

RVec linspace(double lo, double hi, int n) {
  RVec g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * double(i) / double(n - 1);
  return g;
}

}  // namespace

std::pair<GridSet, DictionarySet> build_grids_and_dicts(const ScenarioConfig& cfg,
                                                        const GridConfig& grids,
                                                        double phi_min) {
  require(grids.n_phi >= 2 && grids.n_r >= 2 && grids.n_v >= 2,
          "build_grids_and_dicts: every grid needs at least 2 points");
  GridSet g;
  g.g_phi = linspace(phi_min, phi_min + cfg.angle_window, grids.n_phi);
  g.g_r = linspace(cfg.r_min, cfg.r_max, grids.n_r);
  g.g_v = linspace(cfg.v_min, cfg.v_max, grids.n_v);

  DictionarySet d;
  d.phi_dict.resize(cfg.K, grids.n_phi);
  for (int i = 0; i < grids.n_phi; ++i)
    d.phi_dict.col(i) = basis_vector(BasisKind::SteeringRx, g.g_phi[i], cfg);
  d.r_dict.resize(cfg.S, grids.n_r);
  for (int i = 0; i < grids.n_r; ++i)
    d.r_dict.col(i) = basis_vector(BasisKind::Delay, g.g_r[i], cfg);
  d.v_dict.resize(cfg.T, grids.n_v);
  for (int i = 0; i < grids.n_v; ++i)
    d.v_dict.col(i) = basis_vector(BasisKind::Doppler, g.g_v[i], cfg);
  return {std::move(g), std::move(d)};
}

void AdmScratch::prime(const DictionarySet& dicts) {
  phi_conj = dicts.phi_dict.conjugate();
  r_conj = dicts.r_dict.conjugate();
  v_conj = dicts.v_dict.conjugate();
  primed = true;
}

const Tensor3r& adm_map(const Tensor3c& z_hat, const DictionarySet& dicts,
                        AdmScratch& ws) {
  if (!ws.primed) ws.prime(dicts);
  contract_first_into(z_hat, ws.phi_conj, ws.t1);
  contract_first_into(ws.t1, ws.r_conj, ws.t2);
  contract_first_into(ws.t2, ws.v_conj, ws.t3);
  ws.map.shape = ws.t3.shape;
  if (ws.map.data.size() != ws.t3.size()) ws.map.data.resize(ws.t3.size());
  ws.map.data = ws.t3.data.cwiseAbs();
  return ws.map;
}

Tensor3r adm_map(const Tensor3c& z_hat, const DictionarySet& dicts) {
  AdmScratch ws;
  return adm_map(z_hat, dicts, ws);
}

namespace {

std::array<Eigen::Index, 3> argmax3(const Tensor3r& map) {
  Eigen::Index best = 0;
  double best_val = map.data[0];
  for (Eigen::Index p = 1; p < map.size(); ++p)
    if (map.data[p] > best_val) {  // strict: first occurrence wins ties
      best_val = map.data[p];
      best = p;
    }
  const Eigen::Index n2 = map.shape[2], n1 = map.shape[1];
  return {best / (n1 * n2), (best / n2) % n1, best % n2};
}

}  // namespace

OmpState run_omp(const Tensor3c& z_hat, const DictionarySet& dicts,
                 const GridSet& grids, const OmpStop& stop) {
  const Eigen::Index total =
      grids.g_phi.size() * grids.g_r.size() * grids.g_v.size();
  require(stop.max_iterations <= total,
          "run_omp: iteration count exceeds dictionary size");
  OmpState st;
  st.residual = z_hat;
  AdmScratch ws;
  for (int m = 0; m < stop.max_iterations; ++m) {
    const Tensor3r& map = adm_map(st.residual, dicts, ws);
    const auto [i, j, k] = argmax3(map);
    if (stop.threshold && map.at(i, j, k) <= *stop.threshold) break;
    st.picks.push_back({i, j, k});
    TargetTruth est;
    est.phi = grids.g_phi[i];
    est.r = grids.g_r[j];
    est.v = grids.g_v[k];
    st.estimates.push_back(est);
    st.atoms.push_back(
        outer3(dicts.phi_dict.col(i), dicts.r_dict.col(j), dicts.v_dict.col(k)));
    ProjectionResult proj = project_out(z_hat, st.atoms);
    st.gains = proj.gains;
    st.rank_deficient = st.rank_deficient || proj.rank_deficient;
    st.residual = std::move(proj.residual);
  }
  for (size_t m = 0; m < st.estimates.size(); ++m) st.estimates[m].gamma = st.gains[m];
  return st;
}

RVec attention_weights(const Tensor3r& map, double sigma) {
  const Eigen::Index n = map.size();
  const double mx = map.data.maxCoeff();
  RVec logits;
  if (mx > 0.0)
    logits = sigma * ((map.data / mx) * kAttentionGain);
  else
    logits = RVec::Zero(n);
  const double lmax = logits.maxCoeff();
  RVec w = (logits.array() - lmax).exp();
  return w / w.sum();
}

SoftOmpResult soft_omp_forward(const Tensor3c& z_hat, const DictionarySet& dicts,
                               const GridSet& grids, double sigma, int iterations) {
  require(sigma > 0.0, "soft_omp_forward: sigma must be positive");
  const Eigen::Index np = grids.g_phi.size();
  const Eigen::Index nr = grids.g_r.size();
  const Eigen::Index nv = grids.g_v.size();

  SoftOmpResult out;
  Tensor3c query = z_hat;
  std::vector<Tensor3c> atoms;
  AdmScratch ws;
  for (int m = 0; m < iterations; ++m) {
    const Tensor3r& map = adm_map(query, dicts, ws);
    SoftIteration it;
    it.attention = attention_weights(map, sigma);
    it.a_i = RVec::Zero(np);
    it.a_j = RVec::Zero(nr);
    it.a_k = RVec::Zero(nv);
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < np; ++i)
      for (Eigen::Index j = 0; j < nr; ++j)
        for (Eigen::Index k = 0; k < nv; ++k, ++p) {
          const double w = it.attention[p];
          it.a_i[i] += w;
          it.a_j[j] += w;
          it.a_k[k] += w;
        }
    it.phi = it.a_i.dot(grids.g_phi);
    it.r = it.a_j.dot(grids.g_r);
    it.v = it.a_k.dot(grids.g_v);
    it.atom = outer3(dicts.phi_dict * it.a_i.cast<cd>(),
                     dicts.r_dict * it.a_j.cast<cd>(),
                     dicts.v_dict * it.a_k.cast<cd>());
    atoms.push_back(it.atom);
    query = project_out(z_hat, atoms).residual;

    TargetTruth est;
    est.phi = it.phi;
    est.r = it.r;
    est.v = it.v;
    out.estimates.push_back(est);
    out.iterations.push_back(std::move(it));
  }
  return out;
}

}  // namespace isac
