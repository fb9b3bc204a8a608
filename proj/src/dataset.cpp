// SPDX-License-Identifier: Apache-2.0
#include "wig/dataset.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wig {

namespace {

constexpr char kMagic[8] = {'W', 'I', 'G', 'D', 'A', 'T', 'A', '1'};
constexpr std::uint64_t kFormatVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

Dataset Dataset::head(int n) const {
  if (n < 0 || n > size()) throw std::invalid_argument("Dataset::head: bad count");
  Dataset out;
  out.cfg = cfg;
  out.seed = seed;
  out.samples.assign(samples.begin(), samples.begin() + n);
  return out;
}

Dataset generate_dataset(const NetworkConfig& cfg, int n_samples, std::uint64_t seed,
                         const WmmseOptions& opts,
                         const std::function<void(int, const WmmseResult&)>& on_sample) {
  cfg.validate();
  if (n_samples < 0) throw std::invalid_argument("generate_dataset: negative sample count");

  Dataset ds;
  ds.cfg = cfg;
  ds.seed = seed;
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const auto stream = static_cast<std::uint64_t>(i);
    LabeledSample s;
    s.p_max = cfg.p_max;
    if (cfg.budget_range) {
      std::mt19937_64 rng(derive_seed(seed, 3 * stream + 2));
      std::uniform_real_distribution<double> budget(cfg.budget_range->first,
                                                    cfg.budget_range->second);
      for (int m = 0; m < cfg.cell_count(); ++m) s.p_max[m] = budget(rng);
    }
    const ChannelRealization ch = generate_channels(cfg, derive_seed(seed, 3 * stream));
    const WmmseResult res = wmmse_solve(ch.H, s.p_max, cfg, opts, derive_seed(seed, 3 * stream + 1));
    s.h = ch.H;
    s.p_star = res.p_star;
    s.achieved_rate = res.rate;
    if (on_sample) on_sample(i, res);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);

  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["network"] = ds.cfg;
  header["samples"] = ds.size();
  header["seed"] = ds.seed;
  const std::string text = header.dump();

  os.write(kMagic, sizeof kMagic);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));

  const int m_count = ds.cfg.cell_count();
  const int k_count = ds.cfg.user_count();
  for (const LabeledSample& s : ds.samples) {
    if (s.p_max.size() != m_count || s.p_star.size() != m_count || s.h.rows() != k_count ||
        s.h.cols() != m_count)
      throw std::runtime_error("save_dataset: sample shape does not match config");
    write_doubles(os, s.p_max.data(), static_cast<std::size_t>(m_count));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = s.h;
    write_doubles(os, row_major.data(), static_cast<std::size_t>(k_count * m_count));
    write_doubles(os, s.p_star.data(), static_cast<std::size_t>(m_count));
  }
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);

  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kMagic))
    throw std::runtime_error("load_dataset: not a dataset file: " + path);

  const std::uint64_t len = read_u64(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("load_dataset: truncated header in " + path);
  const nlohmann::json header = nlohmann::json::parse(text);
  if (header.at("format_version").get<std::uint64_t>() != kFormatVersion)
    throw std::runtime_error("load_dataset: unsupported format version in " + path);

  Dataset ds;
  ds.cfg = header.at("network").get<NetworkConfig>();
  ds.cfg.validate();
  ds.seed = header.at("seed").get<std::uint64_t>();
  const auto n = header.at("samples").get<int>();

  const int m_count = ds.cfg.cell_count();
  const int k_count = ds.cfg.user_count();
  ds.samples.resize(static_cast<std::size_t>(n));
  for (LabeledSample& s : ds.samples) {
    s.p_max.resize(m_count);
    read_doubles(is, s.p_max.data(), static_cast<std::size_t>(m_count));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(k_count,
                                                                                     m_count);
    read_doubles(is, row_major.data(), static_cast<std::size_t>(k_count * m_count));
    s.h = row_major;
    s.p_star.resize(m_count);
    read_doubles(is, s.p_star.data(), static_cast<std::size_t>(m_count));
    if (!is) throw std::runtime_error("load_dataset: truncated samples in " + path);
    s.achieved_rate = sum_rate(s.h, s.p_star, ds.cfg);
  }
  return ds;
}

void save_dataset_json(const Dataset& ds, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["network"] = ds.cfg;
  j["seed"] = ds.seed;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const LabeledSample& s : ds.samples) {
    nlohmann::json js;
    js["p_max"] = std::vector<double>(s.p_max.data(), s.p_max.data() + s.p_max.size());
    js["p_star"] = std::vector<double>(s.p_star.data(), s.p_star.data() + s.p_star.size());
    js["achieved_rate"] = s.achieved_rate;
    auto& rows = js["h"] = nlohmann::json::array();
    for (int k = 0; k < s.h.rows(); ++k) {
      std::vector<double> row(static_cast<std::size_t>(s.h.cols()));
      for (int m = 0; m < s.h.cols(); ++m) row[static_cast<std::size_t>(m)] = s.h(k, m);
      rows.push_back(row);
    }
    arr.push_back(std::move(js));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_dataset_json: cannot open " + path);
  os << j.dump(2) << '\n';
}

}  // namespace wig
