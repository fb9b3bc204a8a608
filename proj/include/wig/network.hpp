// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wig/types.hpp"

namespace wig {

/// Deployment parameters for a macro+pico downlink network. Macro cells come
/// first in every per-cell ordering. A pure macro deployment (pico_cells = 0)
/// is a homogeneous network.
struct NetworkConfig {
  int macro_cells = 0;
  int pico_cells = 0;
  int macro_antennas = 0;
  int pico_antennas = 0;
  int macro_users = 0;
  int pico_users = 0;
  Vector p_max;               ///< per-BS power budgets (W, linear scale)
  double noise_power = 1.0;   ///< sigma_0^2 (W)
  /// When set, dataset generation draws each sample's budgets uniformly from
  /// [first, second] instead of using p_max.
  std::optional<std::pair<double, double>> budget_range;
  /// Optional K x M per-link amplitude gains (large-scale extension hook);
  /// empty means unit gain everywhere.
  Matrix link_gains;

  int cell_count() const { return macro_cells + pico_cells; }
  int user_count() const { return macro_cells * macro_users + pico_cells * pico_users; }
  int users_in_cell(int m) const { return m < macro_cells ? macro_users : pico_users; }
  int antennas_at(int m) const { return m < macro_cells ? macro_antennas : pico_antennas; }
  std::vector<int> cell_sizes() const;
  /// Serving cell of flat user index k.
  int cell_of_user(int k) const;

  /// Throws std::invalid_argument on non-positive sizes/powers or when
  /// zero-forcing is infeasible (more users than antennas at some BS).
  void validate() const;

  /// Mixed deployment: 3 macro (16 antennas, 10 users) + 5 pico
  /// (8 antennas, 6 users), unit budgets, unit noise.
  static NetworkConfig hetnet_preset();
  /// 10 macro BSs, 16 antennas, 10 users each, unit budgets, unit noise.
  static NetworkConfig homonet_preset();
};

void to_json(nlohmann::json& j, const NetworkConfig& cfg);
void from_json(const nlohmann::json& j, NetworkConfig& cfg);

bool operator==(const NetworkConfig& a, const NetworkConfig& b);
inline bool operator!=(const NetworkConfig& a, const NetworkConfig& b) { return !(a == b); }
/// Field-by-field difference report, one line per differing field; empty when
/// the configs are equal.
std::string config_diff(const NetworkConfig& a, const NetworkConfig& b);

/// Raw channels, zero-forcing beamformers and the equivalent-channel matrix
/// for one fading draw.
struct ChannelRealization {
  /// Per BS m: antennas_at(m) x K complex channels to every user.
  std::vector<ComplexMatrix> raw;
  /// Per BS m: antennas_at(m) x N_m unit-norm zero-forcing beamformers for
  /// its own users.
  std::vector<ComplexMatrix> beamformers;
  /// K x M nonnegative equivalent channel magnitudes; row blocks are cells,
  /// columns are BSs.
  Matrix H;
  std::uint64_t seed = 0;
  int resamples = 0;  ///< degenerate draws discarded before this one
};

/// Zero-forcing beamformers for one BS. `own_channels` holds the BS's
/// channels to its own users, one column per user. Returns unit-norm columns
/// with cross-user responses nulled. Throws DegenerateChannelError when the
/// columns are not linearly independent.
ComplexMatrix zf_beamformers(const ComplexMatrix& own_channels);

/// Equivalent channel magnitudes h(k, m) = || W_m^H g_{k,m} ||.
Matrix equivalent_channels(const NetworkConfig& cfg, const std::vector<ComplexMatrix>& raw,
                           const std::vector<ComplexMatrix>& beamformers);

/// Draws i.i.d. unit-variance circularly-symmetric complex Gaussian channels,
/// then fills beamformers and H. Identical seeds give identical output.
/// Degenerate draws are resampled with an incremented seed.
ChannelRealization generate_channels(const NetworkConfig& cfg, std::uint64_t seed);

/// Sum rate (bits/s/Hz) of equal per-user power allocation within each cell:
/// sum over users of log2(1 + SINR) with SINR built from squared equivalent
/// channels. Rejects negative powers.
template <typename DerivedH, typename DerivedP>
double sum_rate(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedP>& p,
                const NetworkConfig& cfg) {
  const int m_count = cfg.cell_count();
  const int k_count = cfg.user_count();
  if (h.rows() != k_count || h.cols() != m_count)
    throw std::invalid_argument("sum_rate: H shape does not match config");
  if (p.size() != m_count) throw std::invalid_argument("sum_rate: power vector length mismatch");
  if ((p.array() < 0.0).any()) throw std::invalid_argument("sum_rate: negative power");

  double total = 0.0;
  int k = 0;
  for (int m = 0; m < m_count; ++m) {
    const int users = cfg.users_in_cell(m);
    for (int u = 0; u < users; ++u, ++k) {
      double interference = cfg.noise_power;
      for (int l = 0; l < m_count; ++l) {
        if (l == m) continue;
        const double hkl = h(k, l);
        interference += hkl * hkl * p[l] / cfg.users_in_cell(l);
      }
      const double hkm = h(k, m);
      const double signal = hkm * hkm * p[m] / users;
      total += std::log2(1.0 + signal / interference);
    }
  }
  return total;
}

}  // namespace wig
