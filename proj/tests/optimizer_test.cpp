#include <catch_amalgamated.hpp>

#include <algorithm>
#include <bitset>
#include <cmath>
#include <numeric>
#include <vector>

#include "arena360/optimizer.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace arena360;

namespace {

NavigationProfile make_profile(int nx, int ny, const std::vector<double>& p) {
  NavigationProfile prof;
  prof.p = TileGrid<double>(nx, ny, 0.0);
  for (size_t i = 0; i < p.size(); ++i) prof.p[i] = p[i];
  return prof;
}

NavigationProfile random_profile(std::mt19937_64& rng, int nx, int ny, int zero_tiles = 0) {
  std::vector<double> p(static_cast<size_t>(nx) * ny, 0.0);
  double sum = 0.0;
  for (auto& v : p) {
    v = testutil::uniform(rng, 0.05, 1.0);
    sum += v;
  }
  for (int i = 0; i < zero_tiles && i < static_cast<int>(p.size()) - 1; ++i) {
    sum -= p[i];
    p[i] = 0.0;
  }
  for (auto& v : p) v /= sum;
  return make_profile(nx, ny, p);
}

// Table with explicit layer points (same rate ladder across tiles).
ScalableTileTable table_from_points(int nx, int ny, const std::vector<double>& rates,
                                    const TileGrid<std::vector<double>>& mse) {
  ScalableTileTable t;
  t.layers = static_cast<int>(rates.size());
  t.tiles = TileGrid<TileLayers>(nx, ny);
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) {
      t.tiles.at(n, m).rate_mbps = rates;
      t.tiles.at(n, m).mse = mse.at(n, m);
    }
  return t;
}

using oracles::enumerate_single_link;
using oracles::eval_selection;
using EnumResult = oracles::EnumResult;
using DeskInstance = oracles::DeskInstance;
using DeskOracleResult = oracles::DeskResult;

DeskOracleResult desk_oracle(const DeskInstance& di) { return oracles::desk_search(di); }

DeviceProfile desk_device() {
  DeviceProfile dev;
  dev.decode_mbps = 3.0;
  dev.render_bytes_per_s = 2.075e6 / 0.15;
  dev.viewport_bytes = 2.075e6;  // 16.6 Mbit
  dev.raw_tile_bytes = 0.3 / 8e-6;
  dev.edge_decode_mbps = 5.0;
  return dev;
}

DeskInstance make_desk_instance(std::mt19937_64& rng, bool shared_exponent) {
  DeskInstance di;
  di.profile = random_profile(rng, 2, 2);
  di.model.kind = RdKind::power;
  di.model.tiles = TileGrid<RdTileParams>(2, 2);
  const double shared_b = testutil::uniform(rng, -1.1, -0.6);
  for (auto& t : di.model.tiles) {
    t.a = testutil::uniform(rng, 500, 5000);
    t.b = shared_exponent ? shared_b : testutil::uniform(rng, -1.1, -0.6);
  }
  di.table = build_layer_table(di.model, 3, 0.2, 0.5);
  di.dev = desk_device();
  di.dev.render_bytes_per_s = 2.075e6 / testutil::uniform(rng, 0.1, 0.2);
  di.dev.raw_tile_bytes = testutil::uniform(rng, 0.25, 0.45) / 8e-6;
  di.cw = testutil::uniform(rng, 2.5, 3.5);
  di.cx = testutil::uniform(rng, 1.0, 2.5);
  return di;
}

}  // namespace

// ---------------------------------------------------------------------------
// Latency chain
// ---------------------------------------------------------------------------

TEST_CASE("latency formulas match hand arithmetic", "[optimizer]") {
  LatencyInputs in;
  in.sum_rw_mbps = 100.0;
  in.dt = 1.0;
  in.cw_mbps = 200.0;
  in.splits.zw_mbps = 400.0;
  in.splits.zx_mbps = 100.0;
  in.splits.rw_bytes_per_s = 10.375e6;  // half of 166 Mbit/s
  in.splits.rx_bytes_per_s = 10.375e6;
  in.viewport_bytes = 2.075e6;  // 16.6 Mbit
  in.raw_tile_bytes = 1.25e6;   // 10 Mbit
  in.cx_mbps = 500.0;
  in.edge_decode_mbps = 1000.0;
  in.sum_rx_mbps = 50.0;
  in.sum_rmax_raw_mbps = 16.0;
  in.raw_tiles = 2;

  const LatencyBreakdown lb = latency_chain(in);
  CHECK(lb.tau_w == Catch::Approx(0.5).margin(1e-15));
  CHECK(lb.tau_zw == Catch::Approx(0.25).margin(1e-15));
  CHECK(lb.tau_rw == Catch::Approx(0.2).margin(1e-15));
  CHECK(lb.tau_rx == Catch::Approx(0.2).margin(1e-15));
  CHECK(lb.tau_Z == Catch::Approx(16.0 / 1000.0).margin(1e-15));
  CHECK(lb.tau_x == Catch::Approx((2 * 10.0 + 50.0) / 500.0).margin(1e-12));
  CHECK(lb.tau_zx == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("empty raw set zeroes the server terms", "[optimizer]") {
  LatencyInputs in;
  in.sum_rx_mbps = 30.0;
  in.cx_mbps = 300.0;
  in.dt = 1.0;
  in.edge_decode_mbps = 1000.0;
  in.raw_tiles = 0;
  in.sum_rmax_raw_mbps = 0.0;
  in.raw_tile_bytes = 1.25e6;
  in.splits.zx_mbps = 100.0;
  const LatencyBreakdown lb = latency_chain(in);
  CHECK(lb.tau_Z == 0.0);
  CHECK(lb.tau_x == Catch::Approx(0.1).margin(1e-15));  // compressed term only
}

TEST_CASE("zero split with pending work reports infinite latency", "[optimizer]") {
  LatencyInputs in;
  in.sum_rw_mbps = 10.0;
  in.cw_mbps = 100.0;
  in.dt = 1.0;
  in.splits.zw_mbps = 0.0;
  const LatencyBreakdown lb = latency_chain(in);
  CHECK(std::isinf(lb.tau_zw));
}

TEST_CASE("randomized latency sets match an independent recomputation", "[optimizer]") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    LatencyInputs in;
    in.sum_rw_mbps = testutil::uniform(rng, 1, 500);
    in.sum_rx_mbps = testutil::uniform(rng, 1, 500);
    in.sum_rmax_raw_mbps = testutil::uniform(rng, 1, 100);
    in.raw_tiles = 1 + static_cast<int>(rng() % 5);
    in.dt = testutil::uniform(rng, 0.1, 2.0);
    in.cw_mbps = testutil::uniform(rng, 10, 1000);
    in.cx_mbps = testutil::uniform(rng, 10, 2000);
    in.edge_decode_mbps = testutil::uniform(rng, 10, 5000);
    in.splits.zw_mbps = testutil::uniform(rng, 1, 500);
    in.splits.zx_mbps = testutil::uniform(rng, 1, 500);
    in.splits.rw_bytes_per_s = testutil::uniform(rng, 1e6, 1e9);
    in.splits.rx_bytes_per_s = testutil::uniform(rng, 1e6, 1e9);
    in.raw_tile_bytes = testutil::uniform(rng, 1e5, 1e7);
    in.viewport_bytes = testutil::uniform(rng, 1e5, 1e8);

    const LatencyBreakdown lb = latency_chain(in);
    CHECK(lb.tau_w == Catch::Approx(in.sum_rw_mbps * in.dt / in.cw_mbps).epsilon(1e-12));
    CHECK(lb.tau_Z ==
          Catch::Approx(in.sum_rmax_raw_mbps * in.dt / in.edge_decode_mbps).epsilon(1e-12));
    CHECK(lb.tau_x ==
          Catch::Approx((in.raw_tiles * in.raw_tile_bytes * 8e-6 + in.sum_rx_mbps * in.dt) /
                        in.cx_mbps)
              .epsilon(1e-12));
    CHECK(lb.tau_zw == Catch::Approx(in.sum_rw_mbps * in.dt / in.splits.zw_mbps).epsilon(1e-12));
    CHECK(lb.tau_zx == Catch::Approx(in.sum_rx_mbps * in.dt / in.splits.zx_mbps).epsilon(1e-12));
    CHECK(lb.tau_rw ==
          Catch::Approx(in.viewport_bytes / in.splits.rw_bytes_per_s).epsilon(1e-12));
    CHECK(lb.tau_rx ==
          Catch::Approx(in.viewport_bytes / in.splits.rx_bytes_per_s).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// Single-link allocator
// ---------------------------------------------------------------------------

TEST_CASE("slack budget yields top layers everywhere", "[optimizer]") {
  const RdModel model = synthetic_rd_model(5, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 1.0, 4.0);
  std::mt19937_64 rng(5);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const auto alloc = allocate_single_link(prof, table, 100.0);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) CHECK(alloc.layer.at(n, m) == 3);
  CHECK(alloc.exact);
}

TEST_CASE("uniform likelihood and identical tiles fill evenly", "[optimizer]") {
  RdModel model;
  model.kind = RdKind::power;
  model.tiles = TileGrid<RdTileParams>(2, 2);
  for (auto& t : model.tiles) {
    t.a = 2000;
    t.b = -0.9;
  }
  const ScalableTileTable table = build_layer_table(model, 4, 1.0, 8.0);
  const NavigationProfile prof = make_profile(2, 2, {0.25, 0.25, 0.25, 0.25});
  // budget exactly fits four tiles at layer 3 (4 Mbps each)
  const auto alloc = allocate_single_link(prof, table, 16.0);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) CHECK(alloc.layer.at(n, m) == 3);
}

TEST_CASE("infeasible base layers raise", "[optimizer]") {
  const RdModel model = synthetic_rd_model(6, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 1.0, 4.0);
  const NavigationProfile prof = make_profile(2, 2, {0.25, 0.25, 0.25, 0.25});
  CHECK_THROWS_AS(allocate_single_link(prof, table, 3.0), infeasible_error);
}

TEST_CASE("zero-likelihood tiles receive nothing", "[optimizer]") {
  const RdModel model = synthetic_rd_model(7, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 1.0, 4.0);
  const NavigationProfile prof = make_profile(2, 2, {0.5, 0.5, 0.0, 0.0});
  const auto alloc = allocate_single_link(prof, table, 2.5);
  CHECK(alloc.layer.at(0, 0) >= 1);
  CHECK(alloc.layer.at(1, 0) >= 1);
  CHECK(alloc.layer.at(0, 1) == 0);
  CHECK(alloc.layer.at(1, 1) == 0);
}

TEST_CASE("allocator equals exhaustive enumeration on seeded instances", "[optimizer]") {
  std::mt19937_64 rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    const int nx = 1 + static_cast<int>(rng() % 2);
    const int ny = 1 + static_cast<int>(rng() % 2);
    const int layers = 2 + static_cast<int>(rng() % 3);
    // layer rates on the 0.05 grid so the DP fallback is exact
    std::vector<double> rates;
    double r = 0.05 * testutil::uniform_int(rng, 4, 10);
    for (int l = 0; l < layers; ++l) {
      rates.push_back(r);
      r += 0.05 * testutil::uniform_int(rng, 1, 20);
    }
    TileGrid<std::vector<double>> mse(nx, ny);
    for (int m = 0; m < ny; ++m)
      for (int n = 0; n < nx; ++n) {
        std::vector<double> d;
        double v = testutil::uniform(rng, 500, 5000);
        for (int l = 0; l < layers; ++l) {
          d.push_back(v);
          v *= testutil::uniform(rng, 0.3, 0.95);  // often non-convex steps
        }
        mse.at(n, m) = d;
      }
    const ScalableTileTable table = table_from_points(nx, ny, rates, mse);
    const NavigationProfile prof = random_profile(rng, nx, ny, static_cast<int>(rng() % 2));

    double base = 0.0;
    for (int m = 0; m < ny; ++m)
      for (int n = 0; n < nx; ++n)
        if (prof.p.at(n, m) > 0) base += rates.front();
    const double capacity =
        base + testutil::uniform(rng, 0.0, (rates.back() - rates.front()) * nx * ny);

    const auto alloc = allocate_single_link(prof, table, capacity, nullptr, 0.05);
    const EnumResult oracle = enumerate_single_link(prof, table, capacity);
    REQUIRE(oracle.feasible);
    // evaluate the allocator's selection through the oracle's arithmetic:
    // the objective gap must be exactly zero
    const double mine = eval_selection(prof, table, alloc.layer);
    REQUIRE(mine == oracle.objective);
  }
}

// ---------------------------------------------------------------------------
// expected_distortion
// ---------------------------------------------------------------------------

TEST_CASE("expected distortion formula cases", "[optimizer]") {
  RdModel model;
  model.kind = RdKind::power;
  model.tiles = TileGrid<RdTileParams>(3, 1);
  model.tiles.at(0, 0).a = 1000;
  model.tiles.at(0, 0).b = -1.0;
  model.tiles.at(1, 0).a = 2000;
  model.tiles.at(1, 0).b = -0.5;
  model.tiles.at(2, 0).a = 3000;
  model.tiles.at(2, 0).b = -0.8;
  const ScalableTileTable table = build_layer_table(model, 2, 1.0, 8.0);
  const NavigationProfile prof = make_profile(3, 1, {0.5, 0.3, 0.2});

  PerUserAllocation alloc;
  alloc.tiles = TileGrid<TileAlloc>(3, 1);
  for (auto& t : alloc.tiles) t.in_m = true;

  SECTION("all raw collapses to the top-layer sum") {
    for (auto& t : alloc.tiles) t.raw = true;
    const double expect = 0.5 * 1000 * std::pow(8.0, -1.0) + 0.3 * 2000 * std::pow(8.0, -0.5) +
                          0.2 * 3000 * std::pow(8.0, -0.8);
    CHECK(expected_distortion(alloc, model, prof, table) ==
          Catch::Approx(expect).epsilon(1e-12));
  }
  SECTION("zero enhancement rates leave baseline-only terms") {
    alloc.tiles.at(0, 0).raw = true;
    alloc.tiles.at(1, 0).rw_mbps = 2.0;
    alloc.tiles.at(2, 0).rw_mbps = 3.0;
    const double expect = 0.5 * 1000 * std::pow(8.0, -1.0) + 0.3 * 2000 * std::pow(2.0, -0.5) +
                          0.2 * 3000 * std::pow(3.0, -0.8);
    CHECK(expected_distortion(alloc, model, prof, table) ==
          Catch::Approx(expect).epsilon(1e-12));
  }
  SECTION("hand-evaluated three-tile mix") {
    alloc.tiles.at(0, 0).rw_mbps = 1.5;
    alloc.tiles.at(0, 0).rx_mbps = 2.5;  // total 4.0
    alloc.tiles.at(1, 0).raw = true;
    alloc.tiles.at(2, 0).rw_mbps = 1.0;
    const double expect = 0.5 * 1000 * std::pow(4.0, -1.0) + 0.3 * 2000 * std::pow(8.0, -0.5) +
                          0.2 * 3000 * std::pow(1.0, -0.8);
    CHECK(expected_distortion(alloc, model, prof, table) ==
          Catch::Approx(expect).epsilon(1e-12));
  }
  SECTION("weights multiply each term") {
    for (auto& t : alloc.tiles) t.raw = true;
    SphericalWeights w;
    w.w = TileGrid<double>(3, 1, 0.5);
    CHECK(expected_distortion(alloc, model, prof, table, &w) ==
          Catch::Approx(0.5 * expected_distortion(alloc, model, prof, table)).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// Per-user optimizer
// ---------------------------------------------------------------------------

TEST_CASE("xGen capacity below one raw tile forces k = 0", "[optimizer]") {
  std::mt19937_64 rng(8);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(9, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  DeviceProfile dev = desk_device();
  dev.raw_tile_bytes = 2.0 / 8e-6;  // 2 Mbit raw tile: E_r/C^x > dt
  const auto alloc = optimize_per_user(prof, model, table, dev, {3.0, 1.5}, 1.0, 5.0);
  CHECK(alloc.feasible);
  CHECK(alloc.k_raw == 0);
}

TEST_CASE("per-user optimum lands within 1% of the grid+subset oracle", "[optimizer]") {
  std::mt19937_64 rng(1234);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const DeskInstance di = make_desk_instance(rng, false);
    const DeskOracleResult oracle = desk_oracle(di);
    if (!std::isfinite(oracle.best_subset)) continue;
    ++checked;
    const auto alloc =
        optimize_per_user(di.profile, di.model, di.table, di.dev, {di.cw, di.cx}, di.dt, di.zu);
    REQUIRE(alloc.feasible);
    CHECK(alloc.objective_continuous <= oracle.best_subset * 1.01);
  }
  CHECK(checked >= 8);
}

TEST_CASE("sorted sweep matches exhaustive subset search", "[optimizer]") {
  // tiles share the rate-distortion exponent; the likelihood-weighted slope
  // criterion then ranks raw candidates in true benefit order
  std::mt19937_64 rng(777);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const DeskInstance di = make_desk_instance(rng, true);
    const DeskOracleResult oracle = desk_oracle(di);
    if (!std::isfinite(oracle.best_subset)) continue;
    ++checked;
    CHECK(oracle.best_prefix <= oracle.best_subset * (1.0 + 1e-12));
  }
  CHECK(checked >= 6);
}

TEST_CASE("returned allocations satisfy every constraint", "[optimizer]") {
  std::mt19937_64 rng(2121);
  for (int trial = 0; trial < 15; ++trial) {
    const DeskInstance di = make_desk_instance(rng, false);
    const auto alloc =
        optimize_per_user(di.profile, di.model, di.table, di.dev, {di.cw, di.cx}, di.dt, di.zu);
    if (!alloc.feasible) continue;

    CHECK(alloc.latency.baseline_chain() <= di.dt + 1e-9);
    CHECK(alloc.latency.enhancement_chain() <= di.dt + 1e-9);
    CHECK(alloc.splits.zw_mbps + alloc.splits.zx_mbps <= di.dev.decode_mbps + 1e-9);
    CHECK(alloc.splits.rw_bytes_per_s + alloc.splits.rx_bytes_per_s <=
          di.dev.render_bytes_per_s + 1e-6);

    double sum_rw = 0.0, volume = di.dev.raw_tile_bytes * 8e-6 * alloc.k_raw;
    for (int m = 0; m < 2; ++m)
      for (int n = 0; n < 2; ++n) {
        const TileAlloc& t = alloc.tiles.at(n, m);
        if (!t.in_m) continue;
        CHECK(t.rw_mbps >= di.table.r_min(n, m) - 1e-9);
        CHECK(t.rw_mbps <= di.table.r_max(n, m) + 1e-9);
        CHECK(t.rx_mbps >= -1e-9);
        CHECK(t.rx_mbps <= di.table.r_max(n, m) - t.rw_mbps + 1e-9);
        sum_rw += t.rw_mbps;
        if (!t.raw) volume += t.rx_mbps * di.dt;
      }
    // the latency constraints imply the plain capacity constraints
    CHECK(sum_rw <= di.cw + 1e-9);
    CHECK(volume <= di.cx * di.dt + 1e-9);
  }
}

TEST_CASE("snapped rates sit on layer boundaries below the continuous point", "[optimizer]") {
  std::mt19937_64 rng(333);
  const DeskInstance di = make_desk_instance(rng, false);
  const auto alloc =
      optimize_per_user(di.profile, di.model, di.table, di.dev, {di.cw, di.cx}, di.dt, di.zu);
  REQUIRE(alloc.feasible);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) {
      const TileAlloc& t = alloc.tiles.at(n, m);
      if (!t.in_m || t.raw) continue;
      CHECK(t.rw_mbps <= t.rw_cont_mbps + 1e-9);
      CHECK(t.rw_mbps + t.rx_mbps <= t.rw_cont_mbps + t.rx_cont_mbps + 1e-9);
      const auto& rates = di.table.tiles.at(n, m).rate_mbps;
      CHECK(std::find_if(rates.begin(), rates.end(),
                         [&](double r) { return std::abs(r - t.rw_mbps) < 1e-9; }) !=
            rates.end());
    }
  CHECK(alloc.expected_distortion >= alloc.objective_continuous - 1e-9);
}

TEST_CASE("split search progress is monotone", "[optimizer]") {
  std::mt19937_64 rng(555);
  const DeskInstance di = make_desk_instance(rng, false);
  const auto alloc =
      optimize_per_user(di.profile, di.model, di.table, di.dev, {di.cw, di.cx}, di.dt, di.zu);
  REQUIRE(alloc.feasible);
  REQUIRE(!alloc.split_search_progress.empty());
  for (size_t i = 1; i < alloc.split_search_progress.size(); ++i)
    CHECK(alloc.split_search_progress[i] >= alloc.split_search_progress[i - 1] - 1e-12);
}

TEST_CASE("objective is monotone in every capacity", "[optimizer]") {
  std::mt19937_64 rng(909);
  const DeskInstance base = make_desk_instance(rng, false);

  auto solve = [&](double cw, double cx, double z, double zu, double render) {
    DeskInstance di = base;
    di.dev.decode_mbps = z;
    di.dev.render_bytes_per_s = render;
    const auto a = optimize_per_user(di.profile, di.model, di.table, di.dev, {cw, cx}, di.dt, zu);
    REQUIRE(a.feasible);
    return a.objective_continuous;
  };

  const double z0 = base.dev.decode_mbps, r0 = base.dev.render_bytes_per_s;
  double prev = std::numeric_limits<double>::infinity();
  for (double cx : {0.8, 1.2, 1.6, 2.4, 3.2}) {
    const double obj = solve(base.cw, cx, z0, base.zu, r0);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double cw : {2.5, 3.0, 4.0, 6.0}) {
    const double obj = solve(cw, base.cx, z0, base.zu, r0);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double z : {2.0, 3.0, 4.5, 6.0}) {
    const double obj = solve(base.cw, base.cx, z, base.zu, r0);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double zu : {2.0, 5.0, 10.0}) {
    const double obj = solve(base.cw, base.cx, z0, zu, r0);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double render : {r0, 2 * r0, 4 * r0}) {
    const double obj = solve(base.cw, base.cx, z0, base.zu, render);
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
}

TEST_CASE("raw count grows with xGen capacity", "[optimizer]") {
  std::mt19937_64 rng(51);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(13, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  const DeviceProfile dev = desk_device();
  int prev_k = 0;
  for (double cx : {0.4, 0.8, 1.6, 3.2, 6.4}) {
    const auto alloc = optimize_per_user(prof, model, table, dev, {3.0, cx}, 1.0, 8.0);
    REQUIRE(alloc.feasible);
    CHECK(alloc.k_raw >= prev_k);
    prev_k = alloc.k_raw;
  }
}

TEST_CASE("infeasible instances come back flagged with the minimal chain", "[optimizer]") {
  std::mt19937_64 rng(61);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(14, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  DeviceProfile dev = desk_device();
  dev.render_bytes_per_s = 2.075e6 / 2.0;  // rendering alone takes 2 s > dt
  const auto alloc = optimize_per_user(prof, model, table, dev, {3.0, 1.5}, 1.0, 5.0);
  CHECK_FALSE(alloc.feasible);
  CHECK(alloc.latency.baseline_chain() + alloc.latency.enhancement_chain() > 1.0);
}

// ---------------------------------------------------------------------------
// Single-link (xGen only) variant
// ---------------------------------------------------------------------------

TEST_CASE("single-link variant uses full budgets and no baseline chain", "[optimizer]") {
  std::mt19937_64 rng(71);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(15, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  const DeviceProfile dev = desk_device();
  const auto alloc = optimize_single_link_x(prof, model, table, dev, 3.0, 1.0, 5.0);
  REQUIRE(alloc.feasible);
  CHECK_FALSE(alloc.dual_link);
  CHECK(alloc.latency.tau_w == 0.0);
  CHECK(alloc.latency.tau_zw == 0.0);
  CHECK(alloc.latency.tau_rw == 0.0);
  CHECK(alloc.latency.enhancement_chain() <= 1.0 + 1e-9);
  for (const TileAlloc& t : alloc.tiles)
    if (t.in_m && !t.raw) CHECK(t.rw_mbps == 0.0);
}

// ---------------------------------------------------------------------------
// Multi-user decoupling
// ---------------------------------------------------------------------------

TEST_CASE("one user receives the full budgets", "[optimizer]") {
  std::mt19937_64 rng(81);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(16, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  const DeviceProfile dev = desk_device();

  SystemBudgets budgets;
  budgets.edge_decode_mbps = 5.0;
  budgets.wifi_total_mbps = 3.0;
  budgets.xgen_tx_mbps = {1.5};
  const auto multi = optimize_multi_user({prof}, {&model}, {&table}, dev, budgets, {0}, 1.0);
  const auto single = optimize_per_user(prof, model, table, dev, {3.0, 1.5}, 1.0, 5.0);
  REQUIRE(multi.size() == 1);
  CHECK(multi[0].objective_continuous ==
        Catch::Approx(single.objective_continuous).epsilon(1e-12));
  CHECK(multi[0].k_raw == single.k_raw);
}

TEST_CASE("two users sharing a transmitter split its capacity", "[optimizer]") {
  std::mt19937_64 rng(82);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(17, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  const DeviceProfile dev = desk_device();

  SystemBudgets budgets;
  budgets.edge_decode_mbps = 10.0;
  budgets.wifi_total_mbps = 6.0;
  budgets.xgen_tx_mbps = {3.0, 99.0};
  const auto multi = optimize_multi_user({prof, prof}, {&model, &model}, {&table, &table}, dev,
                                         budgets, {0, 0}, 1.0);
  const auto half = optimize_per_user(prof, model, table, dev, {3.0, 1.5}, 1.0, 5.0);
  REQUIRE(multi.size() == 2);
  for (const auto& a : multi)
    CHECK(a.objective_continuous == Catch::Approx(half.objective_continuous).epsilon(1e-12));
}

TEST_CASE("identical users with exclusive transmitters allocate identically", "[optimizer]") {
  std::mt19937_64 rng(83);
  const NavigationProfile prof = random_profile(rng, 2, 2);
  const RdModel model = synthetic_rd_model(18, 2, 2);
  const ScalableTileTable table = build_layer_table(model, 3, 0.2, 0.5);
  const DeviceProfile dev = desk_device();

  const int nu = 6;
  SystemBudgets budgets;
  budgets.edge_decode_mbps = 30.0;
  budgets.wifi_total_mbps = 18.0;
  budgets.xgen_tx_mbps.assign(nu, 1.5);
  std::vector<NavigationProfile> profiles(nu, prof);
  std::vector<const RdModel*> models(nu, &model);
  std::vector<const ScalableTileTable*> tables(nu, &table);
  const std::vector<int> pi = {0, 1, 2, 3, 4, 5};
  const auto multi = optimize_multi_user(profiles, models, tables, dev, budgets, pi, 1.0);
  for (int u = 1; u < nu; ++u) {
    CHECK(multi[u].objective_continuous ==
          Catch::Approx(multi[0].objective_continuous).epsilon(1e-12));
    CHECK(multi[u].k_raw == multi[0].k_raw);
  }
}
