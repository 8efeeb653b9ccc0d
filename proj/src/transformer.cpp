#include "isac/transformer.hpp"

namespace isac {

using ad::Arr;
using ad::Tape;
using ad::Var;
using Eigen::Index;

namespace {

std::string bp(int m) { return "b" + std::to_string(m) + "."; }

Arr uniform_arr(Index n, double scale, Rng& rng) {
  Arr a(n);
  for (Index i = 0; i < n; ++i) a[i] = rng.uniform(-scale, scale);
  return a;
}

// fan-in scaled uniform init for a real or interleaved-complex matrix
Arr fan_in_init(Index n, Index fan_in, Rng& rng) {
  return uniform_arr(n, 1.0 / std::sqrt(double(fan_in)), rng);
}

void add_scalar(ad::ParamStore& store, const std::string& name, double value) {
  store.add(name, Arr::Constant(1, value));
}

}  // namespace

void init_fcn3(ad::ParamStore& store, const std::string& prefix, Index n_in,
               Index hidden, Index n_out, Rng& rng, double out_scale) {
  store.add(prefix + "l0.w", fan_in_init(hidden * n_in, n_in, rng));
  store.add(prefix + "l0.b", Arr::Zero(hidden));
  store.add(prefix + "l1.w", fan_in_init(hidden * hidden, hidden, rng));
  store.add(prefix + "l1.b", Arr::Zero(hidden));
  const double s = out_scale >= 0.0 ? out_scale : 1.0 / std::sqrt(double(hidden));
  store.add(prefix + "l2.w", uniform_arr(n_out * hidden, s, rng));
  store.add(prefix + "l2.b", Arr::Zero(n_out));
}

Var fcn3(Tape& tape, const ad::ParamStore& params, const std::string& prefix,
         Var input, Index n_in, Index hidden, Index n_out) {
  auto p = [&](const std::string& s) {
    return tape.param(prefix + s, params.at(prefix + s));
  };
  Var h = tape.gelu(tape.affine(input, p("l0.w"), p("l0.b"), hidden, n_in));
  h = tape.gelu(tape.affine(h, p("l1.w"), p("l1.b"), hidden, hidden));
  return tape.affine(h, p("l2.w"), p("l2.b"), n_out, hidden);
}

void init_stage1_params(const ModelConfig& cfg, uint64_t seed, ad::ParamStore& store) {
  Rng rng(derive_seed(seed, 0xdecaf));
  const Index k = cfg.scenario.K, s = cfg.scenario.S, t = cfg.scenario.T;
  const Index np = cfg.grids.n_phi, nr = cfg.grids.n_r, nv = cfg.grids.n_v;
  for (int m = 0; m < cfg.blocks; ++m) {
    const std::string b = bp(m);
    for (const char* dim : {"phi", "r", "v"}) {
      add_scalar(store, b + "lam_k_" + dim, 1.0);
      add_scalar(store, b + "mu_k_" + dim, 0.0);
      add_scalar(store, b + "lam_v1_" + dim, 1.0);
      add_scalar(store, b + "mu_v1_" + dim, 0.0);
      add_scalar(store, b + "lam_v2_" + dim, 1.0);
      add_scalar(store, b + "mu_v2_" + dim, 0.0);
    }
    add_scalar(store, b + "lam_fout", 1.0);
    add_scalar(store, b + "mu_fout", 0.0);
    add_scalar(store, b + "sigma", 1.0);

    // learnable key/value matrices, shapes matching the dictionaries; mu = 0
    // makes the init irrelevant to the first forward pass, and the small
    // scale keeps early mu growth from drowning the dictionary term in
    // unlearned content
    const double w_eps = 0.02;
    store.add(b + "w_k_phi", Arr(w_eps * fan_in_init(2 * np * k, k, rng)));
    store.add(b + "w_k_r", Arr(w_eps * fan_in_init(2 * nr * s, s, rng)));
    store.add(b + "w_k_v", Arr(w_eps * fan_in_init(2 * nv * t, t, rng)));
    store.add(b + "w_v1_phi", Arr(w_eps * fan_in_init(np, np, rng)));
    store.add(b + "w_v1_r", Arr(w_eps * fan_in_init(nr, nr, rng)));
    store.add(b + "w_v1_v", Arr(w_eps * fan_in_init(nv, nv, rng)));
    store.add(b + "w_v2_phi", Arr(w_eps * fan_in_init(2 * k * np, np, rng)));
    store.add(b + "w_v2_r", Arr(w_eps * fan_in_init(2 * s * nr, nr, rng)));
    store.add(b + "w_v2_v", Arr(w_eps * fan_in_init(2 * t * nv, nv, rng)));

    // FFN: 1x1 -> 3x3 -> 1x1 over the S x T plane, channels 4K -> 2K -> 2K -> 4K
    store.add(b + "ffn.c1.w", fan_in_init(2 * k * 4 * k, 4 * k, rng));
    store.add(b + "ffn.c1.b", Arr::Zero(2 * k));
    store.add(b + "ffn.c2.w", fan_in_init(2 * k * 2 * k * 9, 2 * k * 9, rng));
    store.add(b + "ffn.c2.b", Arr::Zero(2 * k));
    store.add(b + "ffn.c3.w", fan_in_init(4 * k * 2 * k, 2 * k, rng));
    store.add(b + "ffn.c3.b", Arr::Zero(4 * k));

    // phi_min adapters: complex K vector, real scalar, complex K vector
    init_fcn3(store, b + "fcn_k_phi.", 1, cfg.fcn_hidden, 2 * k, rng);
    init_fcn3(store, b + "fcn_v1_phi.", 1, cfg.fcn_hidden, 1, rng);
    init_fcn3(store, b + "fcn_v2_phi.", 1, cfg.fcn_hidden, 2 * k, rng);
  }
}

std::vector<std::string> stage1_param_names(const ModelConfig& cfg) {
  ad::ParamStore store;
  init_stage1_params(cfg, 0, store);
  std::vector<std::string> names;
  for (const auto& [name, value] : store.values) names.push_back(name);
  return names;
}

AttentionOut attention_forward(Tape& tape, Var query, std::array<Index, 3> qshape,
                               Var key_t_phi, Index n_phi, Var key_t_r, Index n_r,
                               Var key_t_v, Index n_v, Var sigma) {
  const auto [k, s, t] = qshape;
  Var c1 = tape.contract_first(query, {k, s, t}, key_t_phi, n_phi);
  Var c2 = tape.contract_first(c1, {s, t, n_phi}, key_t_r, n_r);
  Var c3 = tape.contract_first(c2, {t, n_phi, n_r}, key_t_v, n_v);
  Var mag = tape.magnitude(c3);
  Var mx = tape.max_reduce(mag);
  Var logits =
      tape.scale_var(sigma, tape.scale(kAttentionGain, tape.div_by_scalar(mag, mx)));
  AttentionOut out;
  out.attention = tape.softmax(logits);
  out.a_i = tape.marginal(out.attention, {n_phi, n_r, n_v}, 0);
  out.a_j = tape.marginal(out.attention, {n_phi, n_r, n_v}, 1);
  out.a_k = tape.marginal(out.attention, {n_phi, n_r, n_v}, 2);
  return out;
}

ModelForward model_forward(Tape& tape, const ad::ParamStore& params,
                           const ModelConfig& cfg, const Tensor3c& z_hat,
                           double phi_min, const ModelForwardOptions& opts) {
  const Index k = cfg.scenario.K, s = cfg.scenario.S, t = cfg.scenario.T;
  const Index np = cfg.grids.n_phi, nr = cfg.grids.n_r, nv = cfg.grids.n_v;
  require(z_hat.d0() == k && z_hat.d1() == s && z_hat.d2() == t,
          "model_forward: echo shape mismatch");

  auto [grids, dicts] = build_grids_and_dicts(cfg.scenario, cfg.grids, phi_min);

  ModelForward fwd;
  fwd.grids = grids;
  fwd.phi_values.resize(cfg.blocks);
  fwd.r_values.resize(cfg.blocks);
  fwd.v_values.resize(cfg.blocks);

  const Var phi_conj = tape.constant(ad::pack(CMat(dicts.phi_dict.conjugate())));
  const Var r_conj = tape.constant(ad::pack(CMat(dicts.r_dict.conjugate())));
  const Var v_conj = tape.constant(ad::pack(CMat(dicts.v_dict.conjugate())));
  const Var phi_dict = tape.constant(ad::pack(dicts.phi_dict));
  const Var r_dict = tape.constant(ad::pack(dicts.r_dict));
  const Var v_dict = tape.constant(ad::pack(dicts.v_dict));
  const Var g_phi = tape.constant(ad::pack(RVec(grids.g_phi)));
  const Var g_r = tape.constant(ad::pack(RVec(grids.g_r)));
  const Var g_v = tape.constant(ad::pack(RVec(grids.g_v)));
  const Var phi_min_in = tape.constant(Arr::Constant(1, phi_min));
  const Var ones_np = tape.constant(Arr::Ones(np));

  Var query = tape.constant(ad::pack(z_hat));
  Var f_pre = query;  // F_pre starts as the echo itself
  std::vector<Tensor3c> op_atoms;

  for (int m = 0; m < cfg.blocks; ++m) {
    const std::string b = bp(m);
    auto p = [&](const std::string& n) { return tape.param(b + n, params.at(b + n)); };

    Var h_k = fcn3(tape, params, b + "fcn_k_phi.", phi_min_in, 1, cfg.fcn_hidden, 2 * k);
    Var h_v1 = fcn3(tape, params, b + "fcn_v1_phi.", phi_min_in, 1, cfg.fcn_hidden, 1);
    Var h_v2 = fcn3(tape, params, b + "fcn_v2_phi.", phi_min_in, 1, cfg.fcn_hidden, 2 * k);

    // effective keys, carried pre-transposed as [dim, N]
    Var key_t_phi = tape.add(
        tape.scale_var(p("lam_k_phi"), phi_conj),
        tape.scale_var(p("mu_k_phi"), tape.ctranspose(tape.cmul_bcast(h_k, p("w_k_phi"),
                                                                      np, k, 1),
                                                      np, k)));
    Var key_t_r =
        tape.add(tape.scale_var(p("lam_k_r"), r_conj),
                 tape.scale_var(p("mu_k_r"), tape.ctranspose(p("w_k_r"), nr, s)));
    Var key_t_v =
        tape.add(tape.scale_var(p("lam_k_v"), v_conj),
                 tape.scale_var(p("mu_k_v"), tape.ctranspose(p("w_k_v"), nv, t)));

    // effective values
    Var v1_phi = tape.add(
        tape.scale_var(p("lam_v1_phi"), g_phi),
        tape.scale_var(p("mu_v1_phi"),
                       tape.add(tape.scale_var(h_v1, ones_np), p("w_v1_phi"))));
    Var v1_r = tape.add(tape.scale_var(p("lam_v1_r"), g_r),
                        tape.scale_var(p("mu_v1_r"), p("w_v1_r")));
    Var v1_v = tape.add(tape.scale_var(p("lam_v1_v"), g_v),
                        tape.scale_var(p("mu_v1_v"), p("w_v1_v")));
    Var v2_phi = tape.add(
        tape.scale_var(p("lam_v2_phi"), phi_dict),
        tape.scale_var(p("mu_v2_phi"), tape.cmul_bcast(h_v2, p("w_v2_phi"), k, np, 0)));
    Var v2_r = tape.add(tape.scale_var(p("lam_v2_r"), r_dict),
                        tape.scale_var(p("mu_v2_r"), p("w_v2_r")));
    Var v2_v = tape.add(tape.scale_var(p("lam_v2_v"), v_dict),
                        tape.scale_var(p("mu_v2_v"), p("w_v2_v")));

    BlockTrace trace;
    trace.query = query;
    const AttentionOut att = attention_forward(tape, query, {k, s, t}, key_t_phi, np,
                                               key_t_r, nr, key_t_v, nv, p("sigma"));
    trace.attention = att.attention;
    trace.a_i = att.a_i;
    trace.a_j = att.a_j;
    trace.a_k = att.a_k;

    trace.phi = tape.dot(att.a_i, v1_phi);
    trace.r = tape.dot(att.a_j, v1_r);
    trace.v = tape.dot(att.a_k, v1_v);
    fwd.phi_values[m] = tape.scalar(trace.phi);
    fwd.r_values[m] = tape.scalar(trace.r);
    fwd.v_values[m] = tape.scalar(trace.v);

    Var atom_a = tape.mix_cols(att.a_i, v2_phi, k, np);
    Var atom_r = tape.mix_cols(att.a_j, v2_r, s, nr);
    Var atom_v = tape.mix_cols(att.a_k, v2_v, t, nv);
    trace.atom = tape.outer3c(atom_a, atom_r, atom_v, k, s, t);

    // orthogonal projection of the original echo onto the complement of the
    // accumulated atom span; constant with respect to the backward pass
    if (opts.frozen_projections) {
      trace.op_residual = (*opts.frozen_projections)[m];
    } else {
      if (opts.hard_atoms) {
        Index ai, aj, ak;
        tape.val(att.a_i).maxCoeff(&ai);
        tape.val(att.a_j).maxCoeff(&aj);
        tape.val(att.a_k).maxCoeff(&ak);
        op_atoms.push_back(outer3(dicts.phi_dict.col(ai), dicts.r_dict.col(aj),
                                  dicts.v_dict.col(ak)));
      } else {
        op_atoms.push_back(ad::unpack_tensor(tape.val(trace.atom), k, s, t));
      }
      trace.op_residual = project_out(z_hat, op_atoms).residual;
    }
    if (opts.capture_projections) opts.capture_projections->push_back(trace.op_residual);

    // FFN over channel-stacked atom and F_pre images
    Var img = tape.concat(tape.complex_to_channels(trace.atom, k, s, t),
                          tape.complex_to_channels(f_pre, k, s, t));
    Var h1 =
        tape.gelu(tape.conv2d(img, p("ffn.c1.w"), p("ffn.c1.b"), 4 * k, 2 * k, s, t, 1));
    Var h2 =
        tape.gelu(tape.conv2d(h1, p("ffn.c2.w"), p("ffn.c2.b"), 2 * k, 2 * k, s, t, 3));
    Var h3 = tape.conv2d(h2, p("ffn.c3.w"), p("ffn.c3.b"), 2 * k, 4 * k, s, t, 1);
    Var f_out1 = tape.channels_to_complex(tape.slice(h3, 0, 2 * k * s * t), k, s, t);
    f_pre = tape.channels_to_complex(tape.slice(h3, 2 * k * s * t, 2 * k * s * t), k, s, t);

    Var f_out2 = tape.constant(ad::pack(trace.op_residual));
    query = tape.add(tape.scale_var(p("lam_fout"), f_out2),
                     tape.scale_var(p("mu_fout"), f_out1));

    fwd.blocks.push_back(trace);
  }
  return fwd;
}

TapeLoss stage1_loss(Tape& tape, const ModelForward& fwd, const TargetSet& truth) {
  const int m = int(truth.size());
  require(int(fwd.blocks.size()) == m, "stage1_loss: block/target count mismatch");
  RVec phi_t(m), r_t(m), v_t(m);
  for (int i = 0; i < m; ++i) {
    phi_t[i] = truth[i].phi;
    r_t[i] = truth[i].r;
    v_t[i] = truth[i].v;
  }
  TapeLoss out;
  out.matched = mae_losses(phi_t, r_t, v_t, fwd.phi_values, fwd.r_values, fwd.v_values);

  auto dim_loss = [&](const MatchRelation& rel, const RVec& t_vals,
                      auto estimate_of) -> Var {
    Var acc = tape.constant(Arr::Zero(1));
    for (const auto& [ti, ej] : rel.pairs) {
      Var diff =
          tape.sub(estimate_of(ej), tape.constant(Arr::Constant(1, t_vals[ti])));
      acc = tape.add(acc, tape.abs_elem(diff));
    }
    return tape.scale(1.0 / double(m), acc);
  };
  Var la =
      dim_loss(out.matched.angle_rel, phi_t, [&](int j) { return fwd.blocks[j].phi; });
  Var lr = dim_loss(out.matched.range_rel, r_t, [&](int j) { return fwd.blocks[j].r; });
  Var lv =
      dim_loss(out.matched.velocity_rel, v_t, [&](int j) { return fwd.blocks[j].v; });
  out.total = tape.add(la, tape.add(lr, lv));
  out.values = out.matched.losses;
  return out;
}

}  // namespace isac
