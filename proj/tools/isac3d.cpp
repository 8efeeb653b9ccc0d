// Command-line driver: simulate / train / train-cascade / eval / bench.

#include "isac/eval.hpp"
#include "isac/train.hpp"
#include "isac/weights.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace isac;

namespace {

const char* kUsage = R"(usage: isac3d <command> [--config FILE] [--key value | --key=value ...]

commands:
  simulate        generate a dataset file (out, samples, scenario keys)
  train           train the detector on a dataset (dataset, steps, batch, ...)
  train-cascade   jointly train the cascaded refinement on top of trained
                  weights (dataset, weights, steps, ...)
  eval            evaluate methods on a dataset (dataset, methods, weights,
                  out_dir); writes mae.csv, mae.json and CDF files
  bench           wall-clock per method over a dataset (dataset, methods,
                  weights, out_dir, bench_batch)

Config keys use the same names in files and flags; see configs/desk.cfg.
)";

struct Cli {
  std::string command;
  KeyValues file_pairs;
  KeyValues overrides;
};

Cli parse_cli(int argc, char** argv) {
  if (argc < 2) throw std::runtime_error(kUsage);
  Cli cli;
  cli.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0)
      throw std::runtime_error("expected --key[=value], got '" + arg + "'");
    arg = arg.substr(2);
    std::string key, value;
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      key = arg.substr(0, eq);
      value = arg.substr(eq + 1);
    } else {
      key = arg;
      if (i + 1 >= argc) throw std::runtime_error("missing value for --" + key);
      value = argv[++i];
    }
    if (key == "config")
      for (auto& kv : read_config_file(value)) cli.file_pairs.push_back(kv);
    else
      cli.overrides.emplace_back(key, value);
  }
  return cli;
}

void write_resolved_config(const RunConfig& cfg, const std::string& next_to) {
  const std::filesystem::path p(next_to);
  const std::filesystem::path out =
      p.parent_path() / (p.filename().string() + ".config");
  std::ofstream os(out);
  os << serialize_config(cfg);
}

std::vector<std::string> split_methods(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_simulate(const RunConfig& cfg) {
  for (const std::string& w : cfg.scenario.validate())
    std::cerr << "warning: " << w << "\n";
  const Dataset ds =
      generate_dataset(cfg.scenario, cfg.samples, cfg.on_grid ? &cfg.grids : nullptr);
  save_dataset(cfg.out, ds);
  write_resolved_config(cfg, cfg.out);
  std::cout << "wrote " << cfg.samples << " samples to " << cfg.out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool cascade) {
  if (cfg.dataset.empty()) throw std::runtime_error("train: dataset is required");
  const Dataset ds = load_dataset(cfg.dataset);
  ModelConfig mc;
  mc.scenario = ds.config;
  mc.grids = cfg.grids;
  mc.blocks = ds.config.M;

  ad::ParamStore params;
  init_stage1_params(mc, cfg.init_seed, params);
  if (cascade) {
    init_cascade_params(mc, cfg.cascade, cfg.init_seed, params);
    if (!cfg.weights.empty()) load_weights_into(cfg.weights, params);
  } else if (!cfg.weights.empty()) {
    load_weights_into(cfg.weights, params);
  }

  const TrainResult result = cascade ? train_cascade_joint(ds, cfg, params)
                                     : train_stage1(ds, cfg, params);
  save_weights(cfg.weights_out, params);
  write_loss_curve(cfg.losscurve_out, result.curve);
  write_resolved_config(cfg, cfg.weights_out);
  std::cout << "held-out loss " << result.init_heldout << " -> "
            << result.final_heldout << "\nweights: " << cfg.weights_out
            << "\nloss curve: " << cfg.losscurve_out << "\n";
  return 0;
}

ad::ParamStore load_or_init_params(const RunConfig& cfg, const Dataset& ds,
                                   bool need_cascade) {
  ModelConfig mc;
  mc.scenario = ds.config;
  mc.grids = cfg.grids;
  mc.blocks = ds.config.M;
  ad::ParamStore params;
  init_stage1_params(mc, cfg.init_seed, params);
  if (need_cascade) init_cascade_params(mc, cfg.cascade, cfg.init_seed, params);
  if (!cfg.weights.empty()) load_weights_into(cfg.weights, params);
  return params;
}

int cmd_eval(const RunConfig& cfg, bool bench) {
  if (cfg.dataset.empty()) throw std::runtime_error("eval: dataset is required");
  const Dataset ds = load_dataset(cfg.dataset);
  const std::vector<std::string> methods = split_methods(cfg.methods);
  if (methods.empty()) throw std::runtime_error("eval: no methods given");

  const bool needs_model =
      std::any_of(methods.begin(), methods.end(), [](const std::string& m) {
        return m == "transformer" || m == "cascade";
      });
  const bool needs_cascade =
      std::any_of(methods.begin(), methods.end(),
                  [](const std::string& m) { return m == "cascade"; });
  ad::ParamStore params;
  if (needs_model) {
    if (cfg.weights.empty() && !bench)
      throw std::runtime_error("eval: learned methods require --weights");
    params = load_or_init_params(cfg, ds, needs_cascade);
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::vector<MethodEval> results;
  for (const std::string& m : methods) {
    results.push_back(evaluate_method(m, ds, cfg, needs_model ? &params : nullptr));
    std::cout << m << ": phi " << results.back().phi_mae_deg << " deg, r "
              << results.back().r_mae << " m, v " << results.back().v_mae
              << " m/s  (" << results.back().seconds << " s)\n";
  }
  if (bench)
    write_bench_csv(results, cfg, cfg.out_dir + "/bench.csv");
  else
    write_eval_outputs(results, cfg, cfg.out_dir);
  write_resolved_config(cfg, cfg.out_dir + "/run");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const Cli cli = parse_cli(argc, argv);
    const RunConfig cfg = make_run_config(cli.file_pairs, cli.overrides);
    if (cli.command == "simulate") return cmd_simulate(cfg);
    if (cli.command == "train") return cmd_train(cfg, false);
    if (cli.command == "train-cascade") return cmd_train(cfg, true);
    if (cli.command == "eval") return cmd_eval(cfg, false);
    if (cli.command == "bench") return cmd_eval(cfg, true);
    std::cerr << "unknown command: " << cli.command << "\n" << kUsage;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
