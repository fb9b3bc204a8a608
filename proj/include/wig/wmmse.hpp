// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "wig/network.hpp"
#include "wig/types.hpp"

namespace wig {

struct WmmseOptions {
  int max_iters = 500;
  /// Stop when |rate_t - rate_{t-1}| <= rel_obj_tol * max(1, |rate_t|).
  double rel_obj_tol = 1e-6;
  /// Restart 0 starts from full power; the rest draw v uniformly in
  /// [0, sqrt(p_max)] per cell.
  int restarts = 3;
};

struct WmmseResult {
  Vector p_star;                   ///< per-cell powers of the best restart
  double rate = 0.0;               ///< sum rate at p_star
  std::vector<double> rate_trace;  ///< per-iteration rates of the best restart
  int best_restart = 0;
  int iters = 0;  ///< iterations used by the best restart
};

/// Block-coordinate ascent on the weighted-MMSE reformulation of the sum-rate
/// maximization, specialized to scalar per-cell powers. Each iteration updates
/// receiver gains u, MSE weights w, and sqrt-powers v in closed form; the sum
/// rate is non-decreasing along the trace. `p_max` overrides the budgets in
/// cfg (datasets may vary them per sample). Throws std::runtime_error if a
/// restart produces a non-finite iterate.
WmmseResult wmmse_solve(const Matrix& h, const Vector& p_max, const NetworkConfig& cfg,
                        const WmmseOptions& opts = {}, std::uint64_t seed = 0);

/// Exhaustive search over the per-cell grid {0, 1, .., levels} * p_max/levels.
/// Only feasible for small problems; throws std::invalid_argument when the
/// config has more than three cells. Ties keep the first maximum in
/// lexicographic order of the grid indices.
Vector grid_search(const Matrix& h, const Vector& p_max, const NetworkConfig& cfg, int levels);

}  // namespace wig
