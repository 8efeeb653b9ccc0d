#include "isac/weights.hpp"

#include <cstring>
#include <fstream>

namespace isac {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'W', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FileError(std::string("weights: truncated ") + what);
  return v;
}

}  // namespace

void save_weights(const std::string& path, const ad::ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("weights: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<uint32_t>(os, kVersion);
  put<uint64_t>(os, params.values.size());
  uint64_t offset = 0;
  for (const auto& [name, value] : params.values) {
    put<uint32_t>(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put<uint64_t>(os, uint64_t(value.size()));
    put<uint64_t>(os, offset);
    offset += uint64_t(value.size()) * sizeof(double);
  }
  for (const auto& [name, value] : params.values)
    os.write(reinterpret_cast<const char*>(value.data()),
             std::streamsize(value.size() * sizeof(double)));
  if (!os) throw std::runtime_error("weights: write failed for " + path);
}

ad::ParamStore load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("weights: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("weights: bad magic in " + path);
  const uint32_t version = get<uint32_t>(is, "version");
  if (version != kVersion)
    throw std::runtime_error("weights: unsupported container version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kVersion) + ")");
  const uint64_t count = get<uint64_t>(is, "index count");
  std::vector<std::pair<std::string, uint64_t>> index;
  uint64_t expect_offset = 0;
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t len = get<uint32_t>(is, "name length");
    if (len > 4096) throw std::runtime_error("weights: corrupt index (name length)");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw std::runtime_error("weights: truncated name");
    const uint64_t n = get<uint64_t>(is, "array length");
    const uint64_t offset = get<uint64_t>(is, "offset");
    if (offset != expect_offset)
      throw std::runtime_error("weights: corrupt index (offset) at " + name);
    expect_offset += n * sizeof(double);
    index.emplace_back(std::move(name), n);
  }
  ad::ParamStore store;
  for (auto& [name, n] : index) {
    const Eigen::Index len = Eigen::Index(n);
    ad::Arr value(len);
    is.read(reinterpret_cast<char*>(value.data()), std::streamsize(n * sizeof(double)));
    if (!is) throw std::runtime_error("weights: truncated payload at " + name);
    store.add(name, std::move(value));
  }
  return store;
}

void load_weights_into(const std::string& path, ad::ParamStore& params) {
  ad::ParamStore loaded = load_weights(path);
  for (const auto& [name, value] : loaded.values) {
    if (!params.has(name))
      throw std::runtime_error("weights: parameter " + name +
                               " does not exist in the target model");
    if (params.at(name).size() != value.size())
      throw std::runtime_error(
          "weights: shape mismatch for " + name + " (file " +
          std::to_string(value.size()) + ", model " +
          std::to_string(params.at(name).size()) + ")");
  }
  for (auto& [name, value] : loaded.values) params.at(name) = value;
}

}  // namespace isac
