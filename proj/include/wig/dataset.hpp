// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wig/network.hpp"
#include "wig/types.hpp"
#include "wig/wmmse.hpp"

namespace wig {

/// One training example: features {p_max, H} and the WMMSE label.
struct LabeledSample {
  Vector p_max;  ///< per-cell budgets (may vary per sample)
  Matrix h;      ///< K x M equivalent-channel magnitudes
  Vector p_star;
  double achieved_rate = 0.0;  ///< sum_rate(h, p_star)
};

struct Dataset {
  NetworkConfig cfg;
  std::uint64_t seed = 0;
  std::vector<LabeledSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  /// First n samples; subsets used for sample-complexity sweeps are nested.
  Dataset head(int n) const;
};

/// Draws n independent channel realizations and labels each with the WMMSE
/// solution. All randomness (channels, budgets when cfg.budget_range is set,
/// WMMSE restarts) derives from `seed`, so identical inputs give identical
/// datasets. `on_sample` (optional) observes each solve, e.g. for progress
/// logging.
Dataset generate_dataset(const NetworkConfig& cfg, int n_samples, std::uint64_t seed,
                         const WmmseOptions& opts = {},
                         const std::function<void(int, const WmmseResult&)>& on_sample = {});

/// Binary container: magic "WIGDATA1", u64 JSON-header length, JSON header
/// {format_version, network, samples, seed}, then per sample the little-endian
/// doubles of p_max, H (row-major), and p_star. Writing the same dataset twice
/// yields byte-identical files.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Human-readable export of the same content for debugging.
void save_dataset_json(const Dataset& ds, const std::string& path);

}  // namespace wig
