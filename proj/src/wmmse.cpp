// SPDX-License-Identifier: Apache-2.0
#include "wig/wmmse.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace wig {

namespace {

struct Problem {
  Matrix c;                ///< c(k,l) = h(k,l)^2 / N_l
  std::vector<int> serve;  ///< serving cell of user k
};

Problem make_problem(const Matrix& h, const NetworkConfig& cfg) {
  Problem pr;
  pr.c = h.array().square();
  for (int l = 0; l < cfg.cell_count(); ++l) pr.c.col(l) /= cfg.users_in_cell(l);
  pr.serve.resize(static_cast<std::size_t>(cfg.user_count()));
  int k = 0;
  for (int m = 0; m < cfg.cell_count(); ++m)
    for (int u = 0; u < cfg.users_in_cell(m); ++u, ++k) pr.serve[static_cast<std::size_t>(k)] = m;
  return pr;
}

/// One pass of the closed-form block updates u -> w -> v, in place.
void update(const Problem& pr, const Vector& vmax, double noise, Vector& v) {
  const int k_count = static_cast<int>(pr.c.rows());
  const int m_count = static_cast<int>(pr.c.cols());
  const Vector p = v.array().square();

  Vector u(k_count), w(k_count);
  for (int k = 0; k < k_count; ++k) {
    const int m = pr.serve[static_cast<std::size_t>(k)];
    const double recv_power = pr.c.row(k).dot(p) + noise;
    const double direct = std::sqrt(pr.c(k, m)) * v[m];
    u[k] = direct / recv_power;
    const double e = std::max(1.0 - u[k] * direct, 1e-12);
    w[k] = 1.0 / e;
  }

  for (int m = 0; m < m_count; ++m) {
    double numer = 0.0, denom = 0.0;
    for (int k = 0; k < k_count; ++k) {
      denom += w[k] * u[k] * u[k] * pr.c(k, m);
      if (pr.serve[static_cast<std::size_t>(k)] == m)
        numer += w[k] * u[k] * std::sqrt(pr.c(k, m));
    }
    v[m] = denom > 0.0 ? std::clamp(numer / denom, 0.0, vmax[m]) : 0.0;
  }
}

}  // namespace

WmmseResult wmmse_solve(const Matrix& h, const Vector& p_max, const NetworkConfig& cfg,
                        const WmmseOptions& opts, std::uint64_t seed) {
  cfg.validate();
  if (h.rows() != cfg.user_count() || h.cols() != cfg.cell_count())
    throw std::invalid_argument("wmmse_solve: H shape does not match config");
  if (p_max.size() != cfg.cell_count() || (p_max.array() < 0.0).any())
    throw std::invalid_argument("wmmse_solve: bad power budgets");
  if (opts.restarts < 1) throw std::invalid_argument("wmmse_solve: need at least one restart");
  if (opts.max_iters < 1) throw std::invalid_argument("wmmse_solve: need at least one iteration");

  const Problem pr = make_problem(h, cfg);
  const Vector vmax = p_max.cwiseSqrt();

  WmmseResult best;
  best.rate = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    Vector v = vmax;
    if (r > 0) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int m = 0; m < cfg.cell_count(); ++m) v[m] = unit(rng) * vmax[m];
    }

    std::vector<double> trace;
    trace.push_back(sum_rate(h, v.array().square().matrix(), cfg));
    int iters = 0;
    for (; iters < opts.max_iters; ++iters) {
      update(pr, vmax, cfg.noise_power, v);
      if (!v.allFinite())
        throw std::runtime_error("wmmse_solve: non-finite iterate in restart " +
                                 std::to_string(r));
      const double rate = sum_rate(h, v.array().square().matrix(), cfg);
      if (!std::isfinite(rate))
        throw std::runtime_error("wmmse_solve: non-finite rate in restart " + std::to_string(r));
      const double prev = trace.back();
      trace.push_back(rate);
      if (std::abs(rate - prev) <= opts.rel_obj_tol * std::max(1.0, std::abs(rate))) {
        ++iters;
        break;
      }
    }

    if (trace.back() > best.rate) {
      best.p_star = v.array().square().matrix();
      best.rate = trace.back();
      best.rate_trace = std::move(trace);
      best.best_restart = r;
      best.iters = iters;
    }
  }
  return best;
}

Vector grid_search(const Matrix& h, const Vector& p_max, const NetworkConfig& cfg, int levels) {
  cfg.validate();
  if (cfg.cell_count() > 3)
    throw std::invalid_argument("grid_search: exhaustive search limited to three cells");
  if (levels < 1) throw std::invalid_argument("grid_search: need at least one level");
  if (h.rows() != cfg.user_count() || h.cols() != cfg.cell_count())
    throw std::invalid_argument("grid_search: H shape does not match config");
  if (p_max.size() != cfg.cell_count() || (p_max.array() < 0.0).any())
    throw std::invalid_argument("grid_search: bad power budgets");

  const int m_count = cfg.cell_count();
  std::vector<int> idx(static_cast<std::size_t>(m_count), 0);
  Vector p = Vector::Zero(m_count), best_p = Vector::Zero(m_count);
  double best_rate = -std::numeric_limits<double>::infinity();
  while (true) {
    for (int m = 0; m < m_count; ++m)
      p[m] = p_max[m] * static_cast<double>(idx[static_cast<std::size_t>(m)]) / levels;
    const double rate = sum_rate(h, p, cfg);
    if (rate > best_rate) {
      best_rate = rate;
      best_p = p;
    }
    // Odometer with the last cell fastest: visits grid points in
    // lexicographic order, so ties keep the lexicographically first point.
    int m = m_count - 1;
    while (m >= 0 && idx[static_cast<std::size_t>(m)] == levels) {
      idx[static_cast<std::size_t>(m)] = 0;
      --m;
    }
    if (m < 0) break;
    ++idx[static_cast<std::size_t>(m)];
  }
  return best_p;
}

}  // namespace wig
