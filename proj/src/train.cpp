#include "isac/train.hpp"

#include "isac/parallel.hpp"

#include <fstream>
#include <mutex>

namespace isac {

namespace {

ModelConfig model_config(const RunConfig& cfg, const Dataset& ds) {
  ModelConfig mc;
  mc.scenario = ds.config;
  mc.grids = cfg.grids;
  mc.blocks = int(ds.samples.empty() ? cfg.blocks : ds.samples[0].truth.size());
  return mc;
}

struct Split {
  std::vector<int> train, heldout;
};

Split split_dataset(const Dataset& ds, double heldout_frac) {
  Split sp;
  for (int i = 0; i < int(ds.samples.size()); ++i)
    (is_heldout(ds.samples[i], heldout_frac) ? sp.heldout : sp.train).push_back(i);
  require(!sp.train.empty(), "train: no training samples after the held-out split");
  return sp;
}

double sample_loss(const ad::ParamStore& params, const ModelConfig& mc,
                   const CascadeConfig& cc, bool with_cascade, const EchoSample& s,
                   std::map<std::string, ad::Arr>* grads_out) {
  ad::Tape tape;
  const ModelForward s1 = model_forward(tape, params, mc, s.z_hat, s.phi_min);
  TapeLoss loss = stage1_loss(tape, s1, s.truth);
  if (with_cascade) {
    const CascadeForward s2 = cascade_forward(tape, params, mc, cc, s1);
    loss = cascade_loss(tape, loss, s2, s.truth);
  }
  const double value = tape.scalar(loss.total);
  if (grads_out) {
    tape.backward(loss.total);
    *grads_out = tape.param_grads();
  }
  return value;
}

TrainResult train_impl(const Dataset& ds, const RunConfig& cfg, ad::ParamStore& params,
                       bool with_cascade) {
  const ModelConfig mc = model_config(cfg, ds);
  const Split sp = split_dataset(ds, cfg.heldout_frac);
  ad::AdamState adam;
  adam.lr = cfg.lr;

  auto heldout = [&] {
    if (sp.heldout.empty()) return 0.0;
    std::vector<double> losses(sp.heldout.size());
    parallel_for(int(sp.heldout.size()), [&](int i) {
      losses[i] = sample_loss(params, mc, cfg.cascade, with_cascade,
                              ds.samples[sp.heldout[i]], nullptr);
    });
    double acc = 0.0;
    for (double l : losses) acc += l;
    return acc / double(losses.size());
  };

  TrainResult result;
  result.init_heldout = heldout();
  result.curve.push_back({0, 0.0, result.init_heldout});

  // checkpoint selection: the returned parameters are the ones with the
  // best held-out loss seen at any evaluation point
  double best_heldout = result.init_heldout;
  std::map<std::string, ad::Arr> best_values = params.values;

  Rng batch_rng(derive_seed(cfg.init_seed, 0xba7c4));
  double train_acc = 0.0;
  int train_n = 0;
  const int batch = cfg.batch;

  for (int step = 1; step <= cfg.steps; ++step) {
    if (cfg.lr_final >= 0.0 && cfg.steps > 0) {
      const double frac = double(step - 1) / double(cfg.steps);
      adam.lr = cfg.lr_final +
                0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(M_PI * frac));
    }
    std::vector<int> idx(batch);
    for (int b = 0; b < batch; ++b)
      idx[b] = sp.train[batch_rng.next_u64() % sp.train.size()];

    std::vector<std::map<std::string, ad::Arr>> grads(batch);
    std::vector<double> losses(batch);
    parallel_for(batch, [&](int b) {
      losses[b] = sample_loss(params, mc, cfg.cascade, with_cascade,
                              ds.samples[idx[b]], &grads[b]);
    });
    // deterministic reduction in batch order
    std::map<std::string, ad::Arr> avg = std::move(grads[0]);
    for (int b = 1; b < batch; ++b)
      for (auto& [name, g] : avg) g += grads[b].at(name);
    for (auto& [name, g] : avg) g /= double(batch);
    adam.step(params, avg);

    for (double l : losses) train_acc += l;
    train_n += batch;

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const double h = heldout();
      result.curve.push_back({step, train_acc / train_n, h});
      train_acc = 0.0;
      train_n = 0;
      if (h < best_heldout) {
        best_heldout = h;
        best_values = params.values;
      }
    }
  }
  params.values = std::move(best_values);
  result.final_heldout = best_heldout;
  return result;
}

}  // namespace

TrainResult train_stage1(const Dataset& ds, const RunConfig& cfg,
                         ad::ParamStore& params) {
  return train_impl(ds, cfg, params, false);
}

TrainResult train_cascade_joint(const Dataset& ds, const RunConfig& cfg,
                                ad::ParamStore& params) {
  return train_impl(ds, cfg, params, true);
}

double heldout_loss(const Dataset& ds, const RunConfig& cfg,
                    const ad::ParamStore& params, bool with_cascade) {
  const ModelConfig mc = model_config(cfg, ds);
  const Split sp = split_dataset(ds, cfg.heldout_frac);
  if (sp.heldout.empty()) return 0.0;
  std::vector<double> losses(sp.heldout.size());
  parallel_for(int(sp.heldout.size()), [&](int i) {
    losses[i] = sample_loss(params, mc, cfg.cascade, with_cascade,
                            ds.samples[sp.heldout[i]], nullptr);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / double(losses.size());
}

void write_loss_curve(const std::string& path,
                      const std::vector<LossCurvePoint>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.precision(10);
  os << "step,train_loss,heldout_loss\n";
  for (const LossCurvePoint& p : curve)
    os << p.step << "," << p.train_loss << "," << p.heldout_loss << "\n";
}

}  // namespace isac
