#include "isac/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace isac {

namespace {

constexpr double kDeg = M_PI / 180.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Parser {
  RunConfig cfg;
  std::vector<std::string> errors;

  bool to_double(const std::string& v, double& out) {
    try {
      size_t pos = 0;
      out = std::stod(v, &pos);
      return pos == v.size();
    } catch (...) {
      return false;
    }
  }

  bool to_int(const std::string& v, int& out) {
    try {
      size_t pos = 0;
      out = std::stoi(v, &pos);
      return pos == v.size();
    } catch (...) {
      return false;
    }
  }

  bool to_u64(const std::string& v, uint64_t& out) {
    try {
      size_t pos = 0;
      out = std::stoull(v, &pos);
      return pos == v.size();
    } catch (...) {
      return false;
    }
  }

  bool to_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1") {
      out = true;
      return true;
    }
    if (v == "false" || v == "0") {
      out = false;
      return true;
    }
    return false;
  }

  void apply(const std::string& key, const std::string& value) {
    auto bad = [&](const char* type) {
      errors.push_back(key + ": expected " + type + ", got '" + value + "'");
    };
    auto num = [&](double& field) {
      double d;
      to_double(value, d) ? void(field = d) : bad("number");
    };
    auto deg = [&](double& field) {
      double d;
      to_double(value, d) ? void(field = d * kDeg) : bad("angle in degrees");
    };
    auto integer = [&](int& field) {
      int i;
      to_int(value, i) ? void(field = i) : bad("integer");
    };
    auto boolean = [&](bool& field) {
      bool b;
      to_bool(value, b) ? void(field = b) : bad("bool (true/false)");
    };

    ScenarioConfig& sc = cfg.scenario;
    if (key == "K") integer(sc.K);
    else if (key == "S") integer(sc.S);
    else if (key == "T") integer(sc.T);
    else if (key == "fc_hz") num(sc.fc_hz);
    else if (key == "delta_f_hz") num(sc.delta_f_hz);
    else if (key == "cp_s") num(sc.cp_s);
    else if (key == "sigma_s2") num(sc.sigma_s2);
    else if (key == "snr_db") num(sc.snr_db);
    else if (key == "noiseless") boolean(sc.noiseless);
    else if (key == "r_min") num(sc.r_min);
    else if (key == "r_max") num(sc.r_max);
    else if (key == "v_min") num(sc.v_min);
    else if (key == "v_max") num(sc.v_max);
    else if (key == "angle_window_deg") deg(sc.angle_window);
    else if (key == "phi_min_lo_deg") deg(sc.phi_min_lo);
    else if (key == "phi_min_hi_deg") deg(sc.phi_min_hi);
    else if (key == "targets") integer(sc.M);
    else if (key == "master_seed") {
      uint64_t u;
      to_u64(value, u) ? void(sc.master_seed = u) : bad("unsigned integer");
    } else if (key == "n_phi") integer(cfg.grids.n_phi);
    else if (key == "n_r") integer(cfg.grids.n_r);
    else if (key == "n_v") integer(cfg.grids.n_v);
    else if (key == "nc_phi") integer(cfg.cascade.nc_phi);
    else if (key == "nc_r") integer(cfg.cascade.nc_r);
    else if (key == "nc_v") integer(cfg.cascade.nc_v);
    else if (key == "samples") integer(cfg.samples);
    else if (key == "out") cfg.out = value;
    else if (key == "on_grid") boolean(cfg.on_grid);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "weights") cfg.weights = value;
    else if (key == "weights_out") cfg.weights_out = value;
    else if (key == "losscurve_out") cfg.losscurve_out = value;
    else if (key == "steps") integer(cfg.steps);
    else if (key == "batch") integer(cfg.batch);
    else if (key == "blocks") integer(cfg.blocks);
    else if (key == "lr") num(cfg.lr);
    else if (key == "lr_final") num(cfg.lr_final);
    else if (key == "heldout_frac") num(cfg.heldout_frac);
    else if (key == "eval_every") integer(cfg.eval_every);
    else if (key == "init_seed") {
      uint64_t u;
      to_u64(value, u) ? void(cfg.init_seed = u) : bad("unsigned integer");
    } else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "methods") cfg.methods = value;
    else if (key == "hard_atoms") boolean(cfg.hard_atoms);
    else if (key == "bench_batch") integer(cfg.bench_batch);
    else if (key == "music_scan_density") integer(cfg.music.scan_density);
    else if (key == "music_k_ratio") num(cfg.music.smooth_k_ratio);
    else if (key == "music_s_ratio") num(cfg.music.smooth_s_ratio);
    else if (key == "music_overlap") boolean(cfg.music.overlapping_smoothing);
    else errors.push_back("unknown key: " + key);
  }

  void validate() {
    const RunConfig& c = cfg;
    if (c.scenario.K <= 0 || c.scenario.S <= 0 || c.scenario.T <= 0)
      errors.push_back("K, S, T must be positive");
    if (c.grids.n_phi < 2 || c.grids.n_r < 2 || c.grids.n_v < 2)
      errors.push_back("n_phi, n_r, n_v must be at least 2");
    if (c.cascade.nc_phi < 2 || c.cascade.nc_r < 2 || c.cascade.nc_v < 2)
      errors.push_back("nc_phi, nc_r, nc_v must be at least 2");
    if (c.scenario.M < 0) errors.push_back("targets must be non-negative");
    if (c.samples < 1) errors.push_back("samples must be at least 1");
    if (c.steps < 0) errors.push_back("steps must be non-negative");
    if (c.batch < 1) errors.push_back("batch must be at least 1");
    if (c.blocks < 1) errors.push_back("blocks must be at least 1");
    if (c.lr <= 0.0) errors.push_back("lr must be positive");
    if (c.heldout_frac < 0.0 || c.heldout_frac >= 1.0)
      errors.push_back("heldout_frac must be in [0, 1)");
    if (c.eval_every < 1) errors.push_back("eval_every must be at least 1");
    if (c.bench_batch < 1) errors.push_back("bench_batch must be at least 1");
    if (c.music.scan_density < 1) errors.push_back("music_scan_density must be >= 1");
    if (c.scenario.phi_min_hi < c.scenario.phi_min_lo)
      errors.push_back("phi_min interval is empty");
  }
};

}  // namespace

KeyValues read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: " + path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig make_run_config(const KeyValues& file_pairs, const KeyValues& overrides) {
  Parser p;
  for (const auto& [k, v] : file_pairs) p.apply(k, v);
  for (const auto& [k, v] : overrides) p.apply(k, v);
  p.validate();
  if (!p.errors.empty()) {
    std::string msg = "configuration errors:";
    for (const std::string& e : p.errors) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
  return p.cfg;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const ScenarioConfig& sc = c.scenario;
  os << "K = " << sc.K << "\nS = " << sc.S << "\nT = " << sc.T
     << "\nfc_hz = " << sc.fc_hz << "\ndelta_f_hz = " << sc.delta_f_hz
     << "\ncp_s = " << sc.cp_s << "\nsigma_s2 = " << sc.sigma_s2
     << "\nsnr_db = " << sc.snr_db
     << "\nnoiseless = " << (sc.noiseless ? "true" : "false")
     << "\nr_min = " << sc.r_min << "\nr_max = " << sc.r_max
     << "\nv_min = " << sc.v_min << "\nv_max = " << sc.v_max
     << "\nangle_window_deg = " << sc.angle_window / kDeg
     << "\nphi_min_lo_deg = " << sc.phi_min_lo / kDeg
     << "\nphi_min_hi_deg = " << sc.phi_min_hi / kDeg << "\ntargets = " << sc.M
     << "\nmaster_seed = " << sc.master_seed << "\nn_phi = " << c.grids.n_phi
     << "\nn_r = " << c.grids.n_r << "\nn_v = " << c.grids.n_v
     << "\nnc_phi = " << c.cascade.nc_phi << "\nnc_r = " << c.cascade.nc_r
     << "\nnc_v = " << c.cascade.nc_v << "\nsamples = " << c.samples
     << "\nout = " << c.out << "\non_grid = " << (c.on_grid ? "true" : "false")
     << "\ndataset = " << c.dataset << "\nweights = " << c.weights
     << "\nweights_out = " << c.weights_out
     << "\nlosscurve_out = " << c.losscurve_out << "\nsteps = " << c.steps
     << "\nbatch = " << c.batch << "\nblocks = " << c.blocks << "\nlr = " << c.lr
     << "\nlr_final = " << c.lr_final
     << "\nheldout_frac = " << c.heldout_frac << "\neval_every = " << c.eval_every
     << "\ninit_seed = " << c.init_seed << "\nout_dir = " << c.out_dir
     << "\nmethods = " << c.methods
     << "\nhard_atoms = " << (c.hard_atoms ? "true" : "false")
     << "\nbench_batch = " << c.bench_batch
     << "\nmusic_scan_density = " << c.music.scan_density
     << "\nmusic_k_ratio = " << c.music.smooth_k_ratio
     << "\nmusic_s_ratio = " << c.music.smooth_s_ratio
     << "\nmusic_overlap = " << (c.music.overlapping_smoothing ? "true" : "false")
     << "\n";
  return os.str();
}

}  // namespace isac
