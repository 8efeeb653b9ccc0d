#include "isac/cascade.hpp"

namespace isac {

using ad::Arr;
using ad::Tape;
using ad::Var;
using Eigen::Index;

namespace {

std::string cp(int m) { return "c" + std::to_string(m) + "."; }

Arr uniform_arr(Index n, double scale, Rng& rng) {
  Arr a(n);
  for (Index i = 0; i < n; ++i) a[i] = rng.uniform(-scale, scale);
  return a;
}

struct DimSpec {
  std::string name;   // "phi", "r", "v"
  Index n_small;      // reduced grid size
  Index n_marginal;   // stage-1 marginal length
  Index unit;         // K, S or T
  double phase_coef;  // u = phase_coef * f(grid value)
  bool use_sin;       // steering needs sin(), delay/Doppler are linear
};

std::vector<DimSpec> dim_specs(const ModelConfig& mc, const CascadeConfig& cc) {
  const ScenarioConfig& sc = mc.scenario;
  return {
      {"phi", cc.nc_phi, mc.grids.n_phi, Index(sc.K),
       -2.0 * M_PI * sc.spacing() / sc.wavelength(), true},
      {"r", cc.nc_r, mc.grids.n_r, Index(sc.S),
       -2.0 * M_PI * sc.delta_f_hz * 2.0 / kSpeedOfLight, false},
      {"v", cc.nc_v, mc.grids.n_v, Index(sc.T),
       2.0 * M_PI * sc.symbol_duration() * 2.0 * sc.fc_hz / kSpeedOfLight, false},
  };
}

// fixed base grid, uniform over [-0.5, 0.5]
Arr base_grid(Index n) {
  Arr a(n);
  for (Index i = 0; i < n; ++i) a[i] = -0.5 + double(i) / double(n - 1);
  return a;
}

}  // namespace

void init_cascade_params(const ModelConfig& model_cfg, const CascadeConfig& cfg,
                         uint64_t seed, ad::ParamStore& store) {
  Rng rng(derive_seed(seed, 0xca5cade));
  const int hidden = model_cfg.fcn_hidden;
  const auto dims = dim_specs(model_cfg, cfg);
  const Index marg_total = dims[0].n_marginal + dims[1].n_marginal + dims[2].n_marginal;
  // stage-1 grid spacing per dimension: the initial dynamic window covers
  // exactly one stage-1 cell centered on the estimate ((g_min, g_max) =
  // (0, cell) puts the span at center +- cell/2), so each block starts as
  // a genuine fine-grid refinement while still averaging back to the
  // stage-1 estimate under its near-uniform initial attention
  const ScenarioConfig& sc = model_cfg.scenario;
  const std::array<double, 3> cell{
      sc.angle_window / double(model_cfg.grids.n_phi - 1),
      (sc.r_max - sc.r_min) / double(model_cfg.grids.n_r - 1),
      (sc.v_max - sc.v_min) / double(model_cfg.grids.n_v - 1)};
  // near-zero output layers otherwise
  const double out_eps = 1e-4;
  for (int m = 0; m < model_cfg.blocks; ++m) {
    const std::string c = cp(m);
    int di = 0;
    for (const DimSpec& d : dims) {
      store.add(c + "lam_k_" + d.name, Arr::Constant(1, 1.0));
      store.add(c + "mu_k_" + d.name, Arr::Zero(1));
      store.add(c + "lam_v1_" + d.name, Arr::Constant(1, 1.0));
      store.add(c + "mu_v1_" + d.name, Arr::Zero(1));
      store.add(c + "lam_v2_" + d.name, Arr::Constant(1, 1.0));
      store.add(c + "mu_v2_" + d.name, Arr::Zero(1));
      const double s_k = 1.0 / std::sqrt(double(d.unit));
      const double s_n = 1.0 / std::sqrt(double(d.n_small));
      store.add(c + "w_k_" + d.name, uniform_arr(2 * d.n_small * d.unit, s_k, rng));
      store.add(c + "w_v1_" + d.name, uniform_arr(d.n_small, s_n, rng));
      store.add(c + "w_v2_" + d.name, uniform_arr(2 * d.unit * d.n_small, s_n, rng));
      init_fcn3(store, c + "fcn_grid_" + d.name + ".", d.n_marginal, hidden, 2, rng,
                out_eps);
      store.at(c + "fcn_grid_" + d.name + ".l2.b")[1] = cell[di];  // g_max
      init_fcn3(store, c + "fcn_w1_" + d.name + ".", d.n_marginal, hidden, 2, rng,
                out_eps);
      init_fcn3(store, c + "fcn_w2_" + d.name + ".", d.n_marginal, hidden,
                1 + 2 * d.unit, rng, out_eps);
      init_fcn3(store, c + "fcn_wk_" + d.name + ".", d.n_marginal, hidden,
                1 + 2 * d.unit, rng, out_eps);
      ++di;
    }
    init_fcn3(store, c + "fcn_sigma.", marg_total, hidden, 1, rng, out_eps);
  }
}

Var dynamic_grid(Tape& tape, Var g_min, Var g_max, Var center, Var base, Var ones) {
  Var width = tape.sub(g_max, g_min);
  Var offset = tape.add(g_min, center);
  return tape.add(tape.scale_var(width, base), tape.scale_var(offset, ones));
}

CascadeForward cascade_forward(Tape& tape, const ad::ParamStore& params,
                               const ModelConfig& model_cfg, const CascadeConfig& cfg,
                               const ModelForward& stage1) {
  const Index k = model_cfg.scenario.K, s = model_cfg.scenario.S,
              t = model_cfg.scenario.T;
  const auto dims = dim_specs(model_cfg, cfg);
  const int hidden = model_cfg.fcn_hidden;

  CascadeForward fwd;
  const int blocks = int(stage1.blocks.size());
  fwd.phi_values.resize(blocks);
  fwd.r_values.resize(blocks);
  fwd.v_values.resize(blocks);

  std::array<Var, 3> base{tape.constant(base_grid(dims[0].n_small)),
                          tape.constant(base_grid(dims[1].n_small)),
                          tape.constant(base_grid(dims[2].n_small))};

  for (int m = 0; m < blocks; ++m) {
    const std::string c = cp(m);
    auto p = [&](const std::string& n) { return tape.param(c + n, params.at(c + n)); };
    const BlockTrace& s1 = stage1.blocks[m];
    const std::array<Var, 3> marginals{s1.a_i, s1.a_j, s1.a_k};
    const std::array<Var, 3> centers{s1.phi, s1.r, s1.v};

    CascadeBlockTrace trace;
    std::array<Var, 3> key_t, v1, v2;
    std::array<Index, 3> n_small, units;

    for (int di = 0; di < 3; ++di) {
      const DimSpec& d = dims[di];
      n_small[di] = d.n_small;
      const Var ones_small = tape.constant(Arr::Ones(d.n_small));

      // dynamic grid: (g_max - g_min) * a + g_min + center
      Var gw = fcn3(tape, params, c + "fcn_grid_" + d.name + ".", marginals[di],
                    d.n_marginal, hidden, 2);
      Var g_min = tape.slice(gw, 0, 1);
      Var g_max = tape.slice(gw, 1, 1);
      Var grid = dynamic_grid(tape, g_min, g_max, centers[di], base[di], ones_small);
      if (d.name == "phi") {
        trace.g_min_phi = g_min;
        trace.g_max_phi = g_max;
      }
      if (tape.scalar(g_max) <= tape.scalar(g_min)) trace.degenerate_window = true;

      // dictionary regenerated from the dynamic grid
      Var u = d.use_sin ? tape.scale(d.phase_coef, tape.sin_elem(grid))
                        : tape.scale(d.phase_coef, grid);
      Var dict = tape.vandermonde_phase(u, d.unit);  // [unit, n_small]

      // adapted learnable matrices: re-scale/offset for the grid-like one,
      // exponentiation plus complex offset for the dictionary-like ones
      Var w1p = fcn3(tape, params, c + "fcn_w1_" + d.name + ".", marginals[di],
                     d.n_marginal, hidden, 2);
      Var gt_min = tape.slice(w1p, 0, 1);
      Var gt_max = tape.slice(w1p, 1, 1);
      Var w1_adapt =
          tape.add(tape.scale_var(tape.sub(gt_max, gt_min), p("w_v1_" + d.name)),
                   tape.scale_var(tape.add(gt_min, centers[di]), ones_small));

      Var w2p = fcn3(tape, params, c + "fcn_w2_" + d.name + ".", marginals[di],
                     d.n_marginal, hidden, 1 + 2 * d.unit);
      Var w2_adapt = tape.cmul_bcast(
          tape.slice(w2p, 1, 2 * d.unit),
          tape.cpow(p("w_v2_" + d.name), tape.slice(w2p, 0, 1)), d.unit, d.n_small, 0);

      Var wkp = fcn3(tape, params, c + "fcn_wk_" + d.name + ".", marginals[di],
                     d.n_marginal, hidden, 1 + 2 * d.unit);
      Var wk_adapt = tape.cmul_bcast(
          tape.slice(wkp, 1, 2 * d.unit),
          tape.cpow(p("w_k_" + d.name), tape.slice(wkp, 0, 1)), d.n_small, d.unit, 1);

      // effective keys and values at the reduced sizes
      key_t[di] =
          tape.add(tape.scale_var(p("lam_k_" + d.name), tape.conj(dict)),
                   tape.scale_var(p("mu_k_" + d.name),
                                  tape.ctranspose(wk_adapt, d.n_small, d.unit)));
      v1[di] = tape.add(tape.scale_var(p("lam_v1_" + d.name), grid),
                        tape.scale_var(p("mu_v1_" + d.name), w1_adapt));
      v2[di] = tape.add(tape.scale_var(p("lam_v2_" + d.name), dict),
                        tape.scale_var(p("mu_v2_" + d.name), w2_adapt));
      units[di] = d.unit;
    }

    // sigma from the concatenated stage-1 marginals, kept positive
    Var marg_cat = tape.concat(tape.concat(s1.a_i, s1.a_j), s1.a_k);
    Var sigma = tape.exp_elem(
        fcn3(tape, params, c + "fcn_sigma.", marg_cat,
             dims[0].n_marginal + dims[1].n_marginal + dims[2].n_marginal, hidden, 1));

    const AttentionOut att =
        attention_forward(tape, s1.query, {k, s, t}, key_t[0], n_small[0], key_t[1],
                          n_small[1], key_t[2], n_small[2], sigma);
    trace.attention = att.attention;
    trace.phi = tape.dot(att.a_i, v1[0]);
    trace.r = tape.dot(att.a_j, v1[1]);
    trace.v = tape.dot(att.a_k, v1[2]);
    trace.atom = tape.outer3c(tape.mix_cols(att.a_i, v2[0], units[0], n_small[0]),
                              tape.mix_cols(att.a_j, v2[1], units[1], n_small[1]),
                              tape.mix_cols(att.a_k, v2[2], units[2], n_small[2]),
                              units[0], units[1], units[2]);
    fwd.phi_values[m] = tape.scalar(trace.phi);
    fwd.r_values[m] = tape.scalar(trace.r);
    fwd.v_values[m] = tape.scalar(trace.v);
    fwd.blocks.push_back(trace);
  }
  return fwd;
}

TapeLoss cascade_loss(Tape& tape, const TapeLoss& stage1, const CascadeForward& fwd,
                      const TargetSet& truth) {
  const int m = int(truth.size());
  require(int(fwd.blocks.size()) == m, "cascade_loss: block/target count mismatch");
  RVec phi_t(m), r_t(m), v_t(m);
  for (int i = 0; i < m; ++i) {
    phi_t[i] = truth[i].phi;
    r_t[i] = truth[i].r;
    v_t[i] = truth[i].v;
  }
  // stage-2 terms reuse the stage-1 mapping relations (no re-matching)
  auto dim_loss = [&](const MatchRelation& rel, const RVec& t_vals,
                      auto estimate_of) -> Var {
    Var acc = tape.constant(Arr::Zero(1));
    for (const auto& [ti, ej] : rel.pairs) {
      Var diff = tape.sub(estimate_of(ej), tape.constant(Arr::Constant(1, t_vals[ti])));
      acc = tape.add(acc, tape.abs_elem(diff));
    }
    return tape.scale(1.0 / double(m), acc);
  };
  Var la = dim_loss(stage1.matched.angle_rel, phi_t,
                    [&](int j) { return fwd.blocks[j].phi; });
  Var lr =
      dim_loss(stage1.matched.range_rel, r_t, [&](int j) { return fwd.blocks[j].r; });
  Var lv = dim_loss(stage1.matched.velocity_rel, v_t,
                    [&](int j) { return fwd.blocks[j].v; });

  TapeLoss out;
  out.matched = stage1.matched;
  Var stage2_sum = tape.add(la, tape.add(lr, lv));
  out.total = tape.scale(0.5, tape.add(stage1.total, stage2_sum));
  out.values.angle = tape.scalar(la);
  out.values.range = tape.scalar(lr);
  out.values.velocity = tape.scalar(lv);
  return out;
}

}  // namespace isac
