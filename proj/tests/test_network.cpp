// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "wig/network.hpp"
#include "wig/perm.hpp"

using namespace wig;

TEST_CASE("presets have the intended shapes") {
  const auto het = NetworkConfig::hetnet_preset();
  CHECK(het.cell_count() == 8);
  CHECK(het.user_count() == 3 * 10 + 5 * 6);
  CHECK(het.macro_antennas == 16);
  CHECK(het.pico_antennas == 8);
  CHECK(het.p_max.size() == 8);
  CHECK(het.p_max.minCoeff() == 1.0);
  CHECK(het.noise_power == 1.0);
  CHECK_NOTHROW(het.validate());

  const auto homo = NetworkConfig::homonet_preset();
  CHECK(homo.cell_count() == 10);
  CHECK(homo.user_count() == 100);
  CHECK(homo.pico_cells == 0);
  CHECK_NOTHROW(homo.validate());
}

TEST_CASE("validation rejects infeasible deployments") {
  auto cfg = NetworkConfig::hetnet_preset();
  cfg.macro_users = 17;  // more users than the 16 antennas can null
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = NetworkConfig::hetnet_preset();
  cfg.noise_power = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = NetworkConfig::hetnet_preset();
  cfg.p_max[2] = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = NetworkConfig::hetnet_preset();
  cfg.macro_cells = 0;
  cfg.pico_cells = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("cell bookkeeping maps users to cells in order") {
  const auto cfg = NetworkConfig::hetnet_preset();
  CHECK(cfg.cell_of_user(0) == 0);
  CHECK(cfg.cell_of_user(9) == 0);
  CHECK(cfg.cell_of_user(10) == 1);
  CHECK(cfg.cell_of_user(29) == 2);
  CHECK(cfg.cell_of_user(30) == 3);  // first pico user
  CHECK(cfg.cell_of_user(59) == 7);
  const auto sizes = cfg.cell_sizes();
  CHECK(sizes.size() == 8);
  CHECK(sizes[0] == 10);
  CHECK(sizes[3] == 6);
}

TEST_CASE("config json round-trips including budget range") {
  auto cfg = NetworkConfig::hetnet_preset();
  cfg.budget_range = {0.5, 2.0};
  nlohmann::json j = cfg;
  const auto back = j.get<NetworkConfig>();
  CHECK(back == cfg);
  CHECK(config_diff(cfg, back).empty());
}

TEST_CASE("config diff names differing fields") {
  const auto a = NetworkConfig::hetnet_preset();
  auto b = a;
  b.pico_users = 5;
  b.noise_power = 2.0;
  CHECK(a != b);
  const std::string diff = config_diff(a, b);
  CHECK(diff.find("pico_users") != std::string::npos);
  CHECK(diff.find("noise_power") != std::string::npos);
  CHECK(diff.find("macro_cells") == std::string::npos);
}

TEST_CASE("zero-forcing nulls cross-user responses and normalizes columns") {
  std::mt19937_64 seed_rng(42);
  ComplexMatrix own(4, 3);  // 4 antennas, 3 users
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) own(r, c) = std::complex<double>(n(rng), n(rng));
  const ComplexMatrix w = zf_beamformers(own);
  REQUIRE(w.rows() == 4);
  REQUIRE(w.cols() == 3);
  for (int u = 0; u < 3; ++u) {
    CHECK(std::abs(w.col(u).norm() - 1.0) < 1e-12);
    for (int v = 0; v < 3; ++v) {
      const double response = std::abs(own.col(v).dot(w.col(u)));  // g_v^H w_u
      if (u != v) CHECK(response < 1e-10);  // nulled
      if (u == v) CHECK(response > 1e-8);   // kept
    }
  }
}

TEST_CASE("zero-forcing rejects dependent channels") {
  ComplexMatrix own(3, 2);
  own.col(0) << std::complex<double>(1, 0), std::complex<double>(0, 1),
      std::complex<double>(2, 0);
  own.col(1) = 2.0 * own.col(0);
  CHECK_THROWS_AS(zf_beamformers(own), DegenerateChannelError);
}

TEST_CASE("channel generation is deterministic and shaped by the config") {
  const auto cfg = NetworkConfig::hetnet_preset();
  const auto a = generate_channels(cfg, 17);
  const auto b = generate_channels(cfg, 17);
  const auto c = generate_channels(cfg, 18);
  REQUIRE(a.H.rows() == cfg.user_count());
  REQUIRE(a.H.cols() == cfg.cell_count());
  CHECK((a.H - b.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.H - c.H).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.H.minCoeff() >= 0.0);
  REQUIRE(static_cast<int>(a.raw.size()) == cfg.cell_count());
  CHECK(a.raw[0].rows() == 16);
  CHECK(a.raw[3].rows() == 8);
  CHECK(a.raw[0].cols() == cfg.user_count());
}

TEST_CASE("equivalent channel statistics match the beamforming geometry") {
  // After nulling the other own-cell users, the direct equivalent channel
  // squared is chi-square with 2(antennas - users + 1) halves, mean
  // antennas - users + 1; a cross link sees an independent random subspace of
  // dimension equal to the serving cell's user count, mean users.
  auto cfg = NetworkConfig::homonet_preset();
  cfg.macro_cells = 2;
  cfg.p_max = Vector::Ones(2);
  double direct = 0.0, cross = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const Matrix h = generate_channels(cfg, 1000 + static_cast<std::uint64_t>(t)).H;
    for (int k = 0; k < 10; ++k) {
      direct += h(k, 0) * h(k, 0);
      cross += h(10 + k, 0) * h(10 + k, 0);
    }
  }
  direct /= trials * 10.0;
  cross /= trials * 10.0;
  const double expect_direct = 16 - 10 + 1;  // 7
  const double expect_cross = 10;
  CHECK(direct == doctest::Approx(expect_direct).epsilon(0.05));
  CHECK(cross == doctest::Approx(expect_cross).epsilon(0.05));
}

TEST_CASE("sum rate matches the hand-computed two-cell value") {
  NetworkConfig cfg;
  cfg.macro_cells = 2;
  cfg.macro_antennas = 1;
  cfg.macro_users = 1;
  cfg.p_max = Vector::Ones(2);
  Matrix h(2, 2);
  h << 1.0, 0.1, 0.1, 1.0;
  Vector p = Vector::Ones(2);
  // Each user: SINR = 1 / (1 + 0.01), twice.
  CHECK(sum_rate(h, p, cfg) == doctest::Approx(1.9856804168542677).epsilon(1e-12));
}

TEST_CASE("sum rate splits a cell budget across its users") {
  NetworkConfig cfg;
  cfg.macro_cells = 1;
  cfg.macro_antennas = 4;
  cfg.macro_users = 2;
  cfg.p_max = Vector::Ones(1) * 6.0;
  Matrix h(2, 1);
  h << 2.0, 1.0;
  Vector p(1);
  p << 6.0;  // 3.0 per user
  const double expect = std::log2(1.0 + 4.0 * 3.0) + std::log2(1.0 + 1.0 * 3.0);
  CHECK(sum_rate(h, p, cfg) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sum rate is invariant under joint relabeling") {
  const auto cfg = NetworkConfig::hetnet_preset();
  std::mt19937_64 rng(31);
  const auto sizes = cfg.cell_sizes();
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix h = generate_channels(cfg, 500 + static_cast<std::uint64_t>(trial)).H;
    Vector p(cfg.cell_count());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int m = 0; m < cfg.cell_count(); ++m) p[m] = unif(rng);
    const double base = sum_rate(h, p, cfg);

    const auto nested = NestedPermutation::random(sizes, rng);
    const auto rows = induced_row_perm(nested, sizes);
    const Matrix h2 = permute_cols(nested.cells, permute_rows(rows, h));
    const Vector p2 = apply(nested.cells, p);
    CHECK(sum_rate(h2, p2, cfg) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("sum rate validates shapes and signs") {
  const auto cfg = NetworkConfig::hetnet_preset();
  const Matrix h = generate_channels(cfg, 1).H;
  Vector p = Vector::Ones(8);
  CHECK_THROWS_AS(sum_rate(h.topRows(10), p, cfg), std::invalid_argument);
  CHECK_THROWS_AS(sum_rate(h, Vector::Ones(3), cfg), std::invalid_argument);
  p[0] = -0.5;
  CHECK_THROWS_AS(sum_rate(h, p, cfg), std::invalid_argument);
}
