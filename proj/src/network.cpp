// SPDX-License-Identifier: Apache-2.0
#include "wig/network.hpp"

#include <iostream>
#include <random>

#include <nlohmann/json.hpp>

namespace wig {

std::vector<int> NetworkConfig::cell_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(static_cast<std::size_t>(cell_count()));
  for (int m = 0; m < cell_count(); ++m) sizes.push_back(users_in_cell(m));
  return sizes;
}

int NetworkConfig::cell_of_user(int k) const {
  for (int m = 0; m < cell_count(); ++m) {
    k -= users_in_cell(m);
    if (k < 0) return m;
  }
  throw std::invalid_argument("cell_of_user: index out of range");
}

void NetworkConfig::validate() const {
  if (macro_cells < 0 || pico_cells < 0 || cell_count() < 1)
    throw std::invalid_argument("config: need at least one cell");
  if (macro_cells > 0 && (macro_users < 1 || macro_antennas < macro_users))
    throw std::invalid_argument("config: macro cells need 1 <= users <= antennas (ZF feasibility)");
  if (pico_cells > 0 && (pico_users < 1 || pico_antennas < pico_users))
    throw std::invalid_argument("config: pico cells need 1 <= users <= antennas (ZF feasibility)");
  if (p_max.size() != cell_count())
    throw std::invalid_argument("config: p_max length must equal the cell count");
  if ((p_max.array() <= 0.0).any())
    throw std::invalid_argument("config: power budgets must be strictly positive");
  if (!(noise_power > 0.0)) throw std::invalid_argument("config: noise power must be positive");
  if (budget_range) {
    if (!(budget_range->first > 0.0) || budget_range->second < budget_range->first)
      throw std::invalid_argument("config: budget range must satisfy 0 < lo <= hi");
  }
  if (link_gains.size() != 0 &&
      (link_gains.rows() != user_count() || link_gains.cols() != cell_count()))
    throw std::invalid_argument("config: link_gains must be K x M");
}

NetworkConfig NetworkConfig::hetnet_preset() {
  NetworkConfig cfg;
  cfg.macro_cells = 3;
  cfg.pico_cells = 5;
  cfg.macro_antennas = 16;
  cfg.pico_antennas = 8;
  cfg.macro_users = 10;
  cfg.pico_users = 6;
  cfg.p_max = Vector::Ones(cfg.cell_count());
  cfg.noise_power = 1.0;
  return cfg;
}

NetworkConfig NetworkConfig::homonet_preset() {
  NetworkConfig cfg;
  cfg.macro_cells = 10;
  cfg.pico_cells = 0;
  cfg.macro_antennas = 16;
  cfg.pico_antennas = 0;
  cfg.macro_users = 10;
  cfg.pico_users = 0;
  cfg.p_max = Vector::Ones(cfg.cell_count());
  cfg.noise_power = 1.0;
  return cfg;
}

void to_json(nlohmann::json& j, const NetworkConfig& cfg) {
  j = nlohmann::json{{"macro_cells", cfg.macro_cells},
                     {"pico_cells", cfg.pico_cells},
                     {"macro_antennas", cfg.macro_antennas},
                     {"pico_antennas", cfg.pico_antennas},
                     {"macro_users", cfg.macro_users},
                     {"pico_users", cfg.pico_users},
                     {"noise_power", cfg.noise_power}};
  j["p_max"] = std::vector<double>(cfg.p_max.begin(), cfg.p_max.end());
  if (cfg.budget_range)
    j["budget_range"] = {cfg.budget_range->first, cfg.budget_range->second};
}

void from_json(const nlohmann::json& j, NetworkConfig& cfg) {
  cfg = NetworkConfig{};
  j.at("macro_cells").get_to(cfg.macro_cells);
  j.at("pico_cells").get_to(cfg.pico_cells);
  j.at("macro_antennas").get_to(cfg.macro_antennas);
  if (j.contains("pico_antennas")) j.at("pico_antennas").get_to(cfg.pico_antennas);
  j.at("macro_users").get_to(cfg.macro_users);
  if (j.contains("pico_users")) j.at("pico_users").get_to(cfg.pico_users);
  if (j.contains("noise_power")) j.at("noise_power").get_to(cfg.noise_power);
  if (j.contains("p_max")) {
    if (j["p_max"].is_number()) {
      cfg.p_max = Vector::Constant(cfg.cell_count(), j["p_max"].get<double>());
    } else {
      const auto v = j["p_max"].get<std::vector<double>>();
      cfg.p_max = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
  } else {
    cfg.p_max = Vector::Ones(cfg.cell_count());
  }
  if (j.contains("budget_range")) {
    const auto r = j["budget_range"].get<std::vector<double>>();
    if (r.size() != 2) throw std::invalid_argument("config: budget_range must be [lo, hi]");
    cfg.budget_range = {r[0], r[1]};
  }
}

std::string config_diff(const NetworkConfig& a, const NetworkConfig& b) {
  std::string out;
  auto field = [&out](const char* name, auto lhs, auto rhs) {
    if (lhs != rhs)
      out += std::string("  ") + name + ": " + std::to_string(lhs) + " vs " + std::to_string(rhs) +
             "\n";
  };
  field("macro_cells", a.macro_cells, b.macro_cells);
  field("pico_cells", a.pico_cells, b.pico_cells);
  field("macro_antennas", a.macro_antennas, b.macro_antennas);
  field("pico_antennas", a.pico_antennas, b.pico_antennas);
  field("macro_users", a.macro_users, b.macro_users);
  field("pico_users", a.pico_users, b.pico_users);
  field("noise_power", a.noise_power, b.noise_power);
  if (a.p_max.size() != b.p_max.size() || a.p_max != b.p_max) out += "  p_max differs\n";
  if (a.budget_range != b.budget_range) out += "  budget_range differs\n";
  if (a.link_gains.size() != b.link_gains.size() ||
      (a.link_gains.size() > 0 && a.link_gains != b.link_gains))
    out += "  link_gains differ\n";
  return out;
}

bool operator==(const NetworkConfig& a, const NetworkConfig& b) { return config_diff(a, b).empty(); }

ComplexMatrix zf_beamformers(const ComplexMatrix& own_channels) {
  const Index n = own_channels.cols();
  if (n == 0 || own_channels.rows() < n)
    throw std::invalid_argument("zf_beamformers: need 1 <= users <= antennas");
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(own_channels);
  if (cod.rank() < n)
    throw DegenerateChannelError("zf_beamformers: rank-deficient channel block");
  // pinv(G)^H = G (G^H G)^{-1}; column n responds only to user n.
  ComplexMatrix w = cod.pseudoInverse().adjoint();
  for (Index c = 0; c < n; ++c) w.col(c).normalize();
  return w;
}

Matrix equivalent_channels(const NetworkConfig& cfg, const std::vector<ComplexMatrix>& raw,
                           const std::vector<ComplexMatrix>& beamformers) {
  const int m_count = cfg.cell_count();
  const int k_count = cfg.user_count();
  Matrix h(k_count, m_count);
  for (int m = 0; m < m_count; ++m) {
    // K x N_m response of every user to BS m's beam set.
    const ComplexMatrix resp = raw[static_cast<std::size_t>(m)].adjoint() *
                               beamformers[static_cast<std::size_t>(m)];
    h.col(m) = resp.rowwise().norm();
  }
  return h;
}

namespace {

ChannelRealization draw_once(const NetworkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  const int m_count = cfg.cell_count();
  const int k_count = cfg.user_count();

  ChannelRealization real;
  real.seed = seed;
  real.raw.resize(static_cast<std::size_t>(m_count));
  for (int m = 0; m < m_count; ++m) {
    ComplexMatrix& g = real.raw[static_cast<std::size_t>(m)];
    g.resize(cfg.antennas_at(m), k_count);
    for (int k = 0; k < k_count; ++k)
      for (Index a = 0; a < g.rows(); ++a) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        g(a, k) = {re, im};
      }
    if (cfg.link_gains.size() != 0)
      for (int k = 0; k < k_count; ++k) g.col(k) *= std::sqrt(cfg.link_gains(k, m));
  }

  real.beamformers.resize(static_cast<std::size_t>(m_count));
  int first_user = 0;
  for (int m = 0; m < m_count; ++m) {
    const int users = cfg.users_in_cell(m);
    const ComplexMatrix own =
        real.raw[static_cast<std::size_t>(m)].middleCols(first_user, users);
    real.beamformers[static_cast<std::size_t>(m)] = zf_beamformers(own);
    first_user += users;
  }
  real.H = equivalent_channels(cfg, real.raw, real.beamformers);
  return real;
}

}  // namespace

ChannelRealization generate_channels(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  for (int attempt = 0;; ++attempt) {
    try {
      ChannelRealization real = draw_once(cfg, seed + static_cast<std::uint64_t>(attempt));
      real.resamples = attempt;
      return real;
    } catch (const DegenerateChannelError&) {
      std::cerr << "generate_channels: degenerate draw at seed " << (seed + attempt)
                << ", resampling\n";
    }
  }
}

}  // namespace wig
