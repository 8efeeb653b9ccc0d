#include "isac/dataset.hpp"

#include <cstring>
#include <fstream>

namespace isac {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'D', 'S', '0', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(std::string("dataset: truncated ") + what);
  return v;
}

void put_config(std::ostream& os, const ScenarioConfig& c) {
  put<int32_t>(os, c.K);
  put<int32_t>(os, c.S);
  put<int32_t>(os, c.T);
  put<double>(os, c.fc_hz);
  put<double>(os, c.delta_f_hz);
  put<double>(os, c.cp_s);
  put<double>(os, c.sigma_s2);
  put<double>(os, c.snr_db);
  put<uint8_t>(os, c.noiseless ? 1 : 0);
  put<double>(os, c.r_min);
  put<double>(os, c.r_max);
  put<double>(os, c.v_min);
  put<double>(os, c.v_max);
  put<double>(os, c.angle_window);
  put<double>(os, c.phi_min_lo);
  put<double>(os, c.phi_min_hi);
  put<int32_t>(os, c.M);
  put<uint64_t>(os, c.master_seed);
}

ScenarioConfig get_config(std::istream& is) {
  ScenarioConfig c;
  c.K = get<int32_t>(is, "config");
  c.S = get<int32_t>(is, "config");
  c.T = get<int32_t>(is, "config");
  c.fc_hz = get<double>(is, "config");
  c.delta_f_hz = get<double>(is, "config");
  c.cp_s = get<double>(is, "config");
  c.sigma_s2 = get<double>(is, "config");
  c.snr_db = get<double>(is, "config");
  c.noiseless = get<uint8_t>(is, "config") != 0;
  c.r_min = get<double>(is, "config");
  c.r_max = get<double>(is, "config");
  c.v_min = get<double>(is, "config");
  c.v_max = get<double>(is, "config");
  c.angle_window = get<double>(is, "config");
  c.phi_min_lo = get<double>(is, "config");
  c.phi_min_hi = get<double>(is, "config");
  c.M = get<int32_t>(is, "config");
  c.master_seed = get<uint64_t>(is, "config");
  return c;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<uint32_t>(os, kVersion);
  put_config(os, ds.config);
  put<uint64_t>(os, ds.samples.size());
  for (const EchoSample& s : ds.samples) {
    put<uint64_t>(os, s.sample_seed);
    put<double>(os, s.phi_min);
    put<uint32_t>(os, uint32_t(s.truth.size()));
    for (const TargetTruth& t : s.truth) {
      put<double>(os, t.phi);
      put<double>(os, t.r);
      put<double>(os, t.v);
      put<double>(os, t.gamma.real());
      put<double>(os, t.gamma.imag());
    }
    os.write(reinterpret_cast<const char*>(s.z_hat.data.data()),
             std::streamsize(s.z_hat.size() * sizeof(cd)));
  }
  if (!os) throw std::runtime_error("dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("dataset: bad magic in " + path);
  const uint32_t version = get<uint32_t>(is, "version");
  if (version != kVersion)
    throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
  Dataset ds;
  ds.config = get_config(is);
  const uint64_t count = get<uint64_t>(is, "sample count");
  ds.samples.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    EchoSample s;
    s.sample_seed = get<uint64_t>(is, "sample seed");
    s.phi_min = get<double>(is, "phi_min");
    const uint32_t m = get<uint32_t>(is, "target count");
    s.truth.resize(m);
    for (TargetTruth& t : s.truth) {
      t.phi = get<double>(is, "target");
      t.r = get<double>(is, "target");
      t.v = get<double>(is, "target");
      const double re = get<double>(is, "target");
      const double im = get<double>(is, "target");
      t.gamma = cd(re, im);
    }
    s.z_hat = Tensor3c(ds.config.K, ds.config.S, ds.config.T);
    is.read(reinterpret_cast<char*>(s.z_hat.data.data()),
            std::streamsize(s.z_hat.size() * sizeof(cd)));
    if (!is) throw std::runtime_error("dataset: truncated echo payload");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset generate_dataset(const ScenarioConfig& cfg, int n, const GridConfig* snap_to) {
  Dataset ds;
  ds.config = cfg;
  ds.samples.reserve(n);
  TargetSnapFn snap;
  if (snap_to) {
    snap = [&cfg, snap_to](TargetTruth& t, double phi_min) {
      const auto [grids, dicts] = build_grids_and_dicts(cfg, *snap_to, phi_min);
      auto nearest = [](const RVec& g, double x) {
        Eigen::Index best = 0;
        (g.array() - x).abs().minCoeff(&best);
        return g[best];
      };
      t.phi = nearest(grids.g_phi, t.phi);
      t.r = nearest(grids.g_r, t.r);
      t.v = nearest(grids.g_v, t.v);
    };
  }
  for (int i = 0; i < n; ++i)
    ds.samples.push_back(make_sample(cfg, uint64_t(i), snap_to ? &snap : nullptr));
  return ds;
}

bool is_heldout(const EchoSample& sample, double heldout_frac) {
  return double(derive_seed(sample.sample_seed, 99) % 1000000) <
         heldout_frac * 1000000.0;
}

}  // namespace isac
