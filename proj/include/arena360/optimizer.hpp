#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "arena360/geometry.hpp"
#include "arena360/navigation.hpp"
#include "arena360/rdmodel.hpp"

namespace arena360 {

inline constexpr double kMbitPerByte = 8e-6;

struct DeviceProfile {
  double decode_mbps = 300.0;          // headset decode speed z
  double render_bytes_per_s = 2.82e9;  // headset render throughput r * b_h
  double edge_decode_mbps = 3000.0;    // edge server decode speed Z (aggregate)
  double viewport_bytes = 0.0;         // E_v: decoded viewport volume per GOP
  double raw_tile_bytes = 0.0;         // E_r: raw GOP tile volume

  void validate() const {
    if (!(decode_mbps > 0.0) || !(render_bytes_per_s > 0.0) || !(edge_decode_mbps >= 0.0) ||
        !(viewport_bytes > 0.0) || !(raw_tile_bytes > 0.0))
      throw std::invalid_argument("device profile: nonpositive field");
  }
};

struct LinkBudget {
  double cw_mbps = 0.0;  // per-user traditional link
  double cx_mbps = 0.0;  // per-user xGen link
};

struct ComputeSplits {
  double zw_mbps = 0.0, zx_mbps = 0.0;
  double rw_bytes_per_s = 0.0, rx_bytes_per_s = 0.0;
};

// The seven latency terms of one GOP delivery.
struct LatencyBreakdown {
  double tau_w = 0.0;   // baseline transmission
  double tau_Z = 0.0;   // edge decode of raw tiles
  double tau_x = 0.0;   // xGen transmission (raw + compressed enhancement)
  double tau_zw = 0.0;  // headset decode, baseline
  double tau_zx = 0.0;  // headset decode, enhancement
  double tau_rw = 0.0;  // render from baseline
  double tau_rx = 0.0;  // render from baseline + enhancement

  double baseline_chain() const { return tau_w + tau_zw + tau_rw; }
  double enhancement_chain() const { return tau_Z + tau_x + tau_zx + tau_rx; }
};

struct LatencyInputs {
  double sum_rw_mbps = 0.0;        // baseline rates over M
  double sum_rx_mbps = 0.0;        // enhancement rates over M^e
  double sum_rmax_raw_mbps = 0.0;  // top-layer rates over M^r
  int raw_tiles = 0;
  double dt = 1.0;
  double cw_mbps = 0.0, cx_mbps = 0.0;
  double edge_decode_mbps = 0.0;  // Z_u
  ComputeSplits splits;
  double raw_tile_bytes = 0.0, viewport_bytes = 0.0;
};

namespace detail {

// 0/anything = 0 (no work, no latency); positive/0 = infinity.
inline double safe_div(double num, double den) {
  if (num <= 0.0) return 0.0;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace detail

inline LatencyBreakdown latency_chain(const LatencyInputs& in) {
  LatencyBreakdown lb;
  lb.tau_w = detail::safe_div(in.sum_rw_mbps * in.dt, in.cw_mbps);
  lb.tau_Z = detail::safe_div(in.sum_rmax_raw_mbps * in.dt, in.edge_decode_mbps);
  lb.tau_x = detail::safe_div(
      in.raw_tiles * in.raw_tile_bytes * kMbitPerByte + in.sum_rx_mbps * in.dt, in.cx_mbps);
  lb.tau_zw = detail::safe_div(in.sum_rw_mbps * in.dt, in.splits.zw_mbps);
  lb.tau_zx = detail::safe_div(in.sum_rx_mbps * in.dt, in.splits.zx_mbps);
  lb.tau_rw = detail::safe_div(in.viewport_bytes, in.splits.rw_bytes_per_s);
  lb.tau_rx = detail::safe_div(in.viewport_bytes, in.splits.rx_bytes_per_s);
  return lb;
}

// ---------------------------------------------------------------------------
// Single-link discrete layer allocation
// ---------------------------------------------------------------------------

struct SingleLinkAllocation {
  TileGrid<int> layer;     // 1..L for tiles in M, 0 for excluded tiles
  double objective = 0.0;  // sum P (w) D at the selection
  double rate_mbps = 0.0;
  bool exact = false;   // optimum certified (tight sweep or grid-aligned DP)
  bool used_dp = false;
};

// min sum P_nm (w_nm) D_nm(l_nm)  s.t.  sum R_nm(l_nm) <= C, over tiles with
// P_nm > 0. Lagrangian sweep over marginal gains first; when the sweep does
// not end exactly on the budget its optimality is not certified and the
// allocator falls back to dynamic programming over quantized rate.
inline SingleLinkAllocation allocate_single_link(const NavigationProfile& profile,
                                                 const ScalableTileTable& table,
                                                 double capacity_mbps,
                                                 const SphericalWeights* weights = nullptr,
                                                 double dp_quantum_mbps = 0.1) {
  table.validate();
  if (!(capacity_mbps > 0.0)) throw std::invalid_argument("allocate: capacity must be positive");
  const int nx = profile.p.nx(), ny = profile.p.ny();
  if (nx != table.tiles.nx() || ny != table.tiles.ny())
    throw std::invalid_argument("allocate: profile/table shape mismatch");

  struct Tile {
    int n, m;
    double scale;  // P (* w)
    const TileLayers* layers;
  };
  std::vector<Tile> act;
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) {
      const double p = profile.p.at(n, m);
      if (p <= 0.0) continue;
      const double s = weights ? p * weights->w.at(n, m) : p;
      act.push_back({n, m, s, &table.tiles.at(n, m)});
    }

  const int L = table.layers;
  double base_rate = 0.0, base_obj = 0.0;
  for (const Tile& t : act) {
    base_rate += t.layers->rate_mbps.front();
    base_obj += t.scale * t.layers->mse.front();
  }
  if (base_rate > capacity_mbps + 1e-9)
    throw infeasible_error("infeasible: base layers exceed budget");

  SingleLinkAllocation out;
  out.layer = TileGrid<int>(nx, ny, 0);
  std::vector<int> sel(act.size(), 1);

  // Upgrade steps sorted by distortion gain per rate unit.
  struct Step {
    size_t tile;
    int to_layer;  // 1-based
    double dr, gain;
  };
  std::vector<Step> steps;
  bool convex = true;
  for (size_t i = 0; i < act.size(); ++i) {
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (int l = 1; l < L; ++l) {
      const double dr = act[i].layers->rate_mbps[l] - act[i].layers->rate_mbps[l - 1];
      const double gain = act[i].scale * (act[i].layers->mse[l - 1] - act[i].layers->mse[l]);
      const double ratio = gain / dr;
      if (ratio > prev_ratio * (1.0 + 1e-12)) convex = false;
      prev_ratio = ratio;
      steps.push_back({i, l + 1, dr, gain});
    }
  }
  std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) {
    const double ra = a.gain / a.dr, rb = b.gain / b.dr;
    if (ra != rb) return ra > rb;
    if (a.tile != b.tile) return a.tile < b.tile;
    return a.to_layer < b.to_layer;
  });

  double spent = base_rate, obj = base_obj;
  bool certified = false;
  if (convex) {
    bool all_taken = true;
    for (const Step& s : steps) {
      if (s.to_layer != sel[s.tile] + 1) continue;  // predecessor was skipped
      if (spent + s.dr <= capacity_mbps + 1e-12) {
        sel[s.tile] = s.to_layer;
        spent += s.dr;
        obj -= s.gain;
      } else {
        all_taken = false;
      }
    }
    certified = all_taken || std::abs(spent - capacity_mbps) <= 1e-9 * std::max(1.0, capacity_mbps);
  }

  if (!convex || !certified) {
    // DP over rate quanta; layer costs round up, so any DP solution is
    // feasible at the true rates. Exact whenever the table rates sit on
    // the quantum grid.
    const double q = dp_quantum_mbps;
    const auto cost_units = [&](double rate) {
      return static_cast<int>(std::ceil(rate / q - 1e-9));
    };
    const int budget = static_cast<int>(std::floor(capacity_mbps / q + 1e-9));
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(budget + 1, inf);
    std::vector<std::vector<std::int8_t>> choice(act.size(),
                                                 std::vector<std::int8_t>(budget + 1, -1));
    dp[0] = 0.0;
    for (size_t i = 0; i < act.size(); ++i) {
      std::vector<double> next(budget + 1, inf);
      for (int j = 0; j <= budget; ++j) {
        if (dp[j] == inf) continue;
        for (int l = 0; l < L; ++l) {
          const int c = j + cost_units(act[i].layers->rate_mbps[l]);
          if (c > budget) break;  // rates increase with l
          const double v = dp[j] + act[i].scale * act[i].layers->mse[l];
          if (v < next[c]) {
            next[c] = v;
            choice[i][c] = static_cast<std::int8_t>(l);
          }
        }
      }
      dp.swap(next);
    }
    int best_j = -1;
    for (int j = 0; j <= budget; ++j)
      if (dp[j] < inf && (best_j < 0 || dp[j] < dp[best_j])) best_j = j;
    if (best_j >= 0) {
      // Walk the choice table backwards to recover layers.
      std::vector<int> dp_sel(act.size(), 1);
      int j = best_j;
      bool ok = true;
      for (size_t i = act.size(); i-- > 0;) {
        const int l = choice[i][j];
        if (l < 0) {
          ok = false;
          break;
        }
        dp_sel[i] = l + 1;
        j -= cost_units(act[i].layers->rate_mbps[l]);
      }
      if (ok) {
        sel = dp_sel;
        spent = 0.0;
        obj = 0.0;
        for (size_t i = 0; i < act.size(); ++i) {
          spent += act[i].layers->rate_mbps[sel[i] - 1];
          obj += act[i].scale * act[i].layers->mse[sel[i] - 1];
        }
        out.used_dp = true;
        certified = true;
      }
    }
  }

  for (size_t i = 0; i < act.size(); ++i) out.layer.at(act[i].n, act[i].m) = sel[i];
  out.objective = obj;
  out.rate_mbps = spent;
  out.exact = certified;
  return out;
}

// ---------------------------------------------------------------------------
// Per-user dual-connectivity optimization
// ---------------------------------------------------------------------------

struct TileAlloc {
  bool in_m = false;
  bool raw = false;
  double rw_mbps = 0.0, rx_mbps = 0.0;            // snapped to layer rates
  double rw_cont_mbps = 0.0, rx_cont_mbps = 0.0;  // continuous optimum
};

struct PerUserAllocation {
  TileGrid<TileAlloc> tiles;
  int k_raw = 0;
  ComputeSplits splits;
  LatencyBreakdown latency;  // evaluated at the snapped rates
  double objective_continuous = std::numeric_limits<double>::infinity();
  double expected_distortion = std::numeric_limits<double>::infinity();  // snapped
  bool feasible = false;
  bool dual_link = true;
  std::vector<double> split_search_progress;  // pooled budget per refinement step
};

// Expected viewport distortion of an allocation: raw tiles at the top
// layer rate, compressed tiles at their combined baseline + enhancement
// rate. Weighted per tile when spherical weights are given.
inline double expected_distortion(const PerUserAllocation& alloc, const RdModel& model,
                                  const NavigationProfile& profile,
                                  const ScalableTileTable& table,
                                  const SphericalWeights* weights = nullptr) {
  double acc = 0.0;
  for (int m = 0; m < profile.p.ny(); ++m)
    for (int n = 0; n < profile.p.nx(); ++n) {
      const TileAlloc& t = alloc.tiles.at(n, m);
      if (!t.in_m) continue;
      const double scale =
          weights ? profile.p.at(n, m) * weights->w.at(n, m) : profile.p.at(n, m);
      const double rate = t.raw ? table.r_max(n, m) : t.rw_mbps + t.rx_mbps;
      acc += scale * model.eval(n, m, rate);
    }
  return acc;
}

namespace detail {

struct OptTile {
  int n, m;
  double scale;      // P (* w)
  double rmin, rmax;
  double a, b;       // power params (or converted slope inverse for exp)
};

// Inverse of |dD/dT| = lambda for one tile, clamped to [rmin, rmax].
inline double waterfill_rate(const OptTile& t, double lambda, RdKind kind, double c, double d) {
  double r;
  if (kind == RdKind::power) {
    r = std::pow(t.scale * t.a * std::abs(t.b) / lambda, 1.0 / (1.0 - t.b));
  } else {
    r = std::log(std::max(t.scale * c * d / lambda, 1e-300)) / d;
  }
  return std::clamp(r, t.rmin, t.rmax);
}

// min sum scale * D(T) s.t. sum T <= budget, T in [rmin, rmax];
// exact KKT solution by bisection on the rate multiplier.
inline std::vector<double> waterfill(const std::vector<OptTile>& tiles,
                                     const std::vector<const RdTileParams*>& params,
                                     RdKind kind, double budget) {
  std::vector<double> t(tiles.size());
  double sum_min = 0.0, sum_max = 0.0;
  for (const OptTile& ot : tiles) {
    sum_min += ot.rmin;
    sum_max += ot.rmax;
  }
  if (budget >= sum_max) {
    for (size_t i = 0; i < tiles.size(); ++i) t[i] = tiles[i].rmax;
    return t;
  }
  if (budget < sum_min - 1e-9) throw infeasible_error("waterfill: budget below minimum rates");

  auto fill = [&](double lambda) {
    double s = 0.0;
    for (size_t i = 0; i < tiles.size(); ++i) {
      t[i] = waterfill_rate(tiles[i], lambda, kind, params[i]->c, params[i]->d);
      s += t[i];
    }
    return s;
  };

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (size_t i = 0; i < tiles.size(); ++i) {
    double slope_min, slope_max;
    if (kind == RdKind::power) {
      slope_min = tiles[i].scale * tiles[i].a * std::abs(tiles[i].b) *
                  std::pow(tiles[i].rmax, tiles[i].b - 1.0);
      slope_max = tiles[i].scale * tiles[i].a * std::abs(tiles[i].b) *
                  std::pow(tiles[i].rmin, tiles[i].b - 1.0);
    } else {
      slope_min = tiles[i].scale * params[i]->c * params[i]->d *
                  std::exp(-params[i]->d * tiles[i].rmax);
      slope_max = tiles[i].scale * params[i]->c * params[i]->d *
                  std::exp(-params[i]->d * tiles[i].rmin);
    }
    lo = std::min(lo, slope_min);
    hi = std::max(hi, slope_max);
  }
  lo *= 0.5;
  hi *= 2.0;
  // fill() is decreasing in lambda; keep the feasible (<= budget) side.
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fill(mid) > budget)
      lo = mid;
    else
      hi = mid;
  }
  fill(hi);
  return t;
}

struct SplitPoint {
  double fz = 0.5, fr = 0.5;
  double pool = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

struct SplitContext {
  double dt, cw, cx, z, render_secs /* B */, k3, w_need;
};

// Q_w + Q_x of the two latency chains at a given decode/render split.
inline double pooled_budget(const SplitContext& c, double fz, double fr, double* qw_out,
                            double* qx_out) {
  const double cw_cost = c.dt * (1.0 / c.cw + 1.0 / (fz * c.z));
  const double cx_cost = c.dt * (1.0 / c.cx + 1.0 / ((1.0 - fz) * c.z));
  const double qw = (c.dt - c.render_secs / fr) / cw_cost;
  const double qx = (c.dt - c.k3 - c.render_secs / (1.0 - fr)) / cx_cost;
  if (qw_out) *qw_out = qw;
  if (qx_out) *qx_out = qx;
  return qw + qx;
}

// Maximize the pooled rate budget over the split fractions. The function
// is concave in each coordinate with closed-form argmaxima; the feasible
// set is an fz interval with a per-fz fr interval, so the scan probes
// those intervals directly before the clipped coordinate ascent.
inline SplitPoint optimize_splits(const SplitContext& c, std::vector<double>* progress) {
  constexpr double kLo = 1e-6, kHi = 1.0 - 1e-6;
  SplitPoint best;

  auto consider = [&](double fz, double fr) {
    fz = std::clamp(fz, kLo, kHi);
    fr = std::clamp(fr, kLo, kHi);
    double qw, qx;
    const double pool = pooled_budget(c, fz, fr, &qw, &qx);
    if (qw < c.w_need - 1e-12 || qx < -1e-12) return;
    if (!best.feasible || pool > best.pool) best = {fz, fr, pool, true};
  };

  const double fr_hi =
      c.dt - c.k3 > 0.0 ? 1.0 - c.render_secs / (c.dt - c.k3) : -1.0;
  const int sweep = 160;
  for (int i = 0; i <= sweep; ++i) {
    const double fz = std::clamp(i / static_cast<double>(sweep), kLo, kHi);
    const double cw_cost = c.dt * (1.0 / c.cw + 1.0 / (fz * c.z));
    const double room = c.dt - c.w_need * cw_cost;  // need B/fr <= room
    if (room <= 0.0) continue;
    const double fr_lo = c.render_secs / room;
    if (fr_lo > fr_hi) continue;
    const double hw = c.cw * fz * c.z / (c.cw + fz * c.z);
    const double hx = c.cx * (1.0 - fz) * c.z / (c.cx + (1.0 - fz) * c.z);
    const double fr_star = std::sqrt(hw) / (std::sqrt(hw) + std::sqrt(hx));
    consider(fz, std::clamp(fr_star, fr_lo, fr_hi));
    consider(fz, fr_lo);
    consider(fz, fr_hi);
    consider(fz, 0.5 * (fr_lo + fr_hi));
  }
  if (!best.feasible) return best;
  if (progress) progress->push_back(best.pool);

  for (int round = 0; round < 80; ++round) {
    const SplitPoint prev = best;

    // Render split: maximize -B*Hw/fr - B*Hx/(1-fr).
    {
      const double fz = best.fz;
      const double hw = c.cw * fz * c.z / (c.cw + fz * c.z);
      const double hx = c.cx * (1.0 - fz) * c.z / (c.cx + (1.0 - fz) * c.z);
      const double sw = std::sqrt(std::max(hw, 0.0));
      const double sx = std::sqrt(std::max(hx, 0.0));
      if (sw + sx > 0.0) {
        double fr = sw / (sw + sx);
        // Clip into the feasible interval for this fz.
        const double cw_cost = c.dt * (1.0 / c.cw + 1.0 / (fz * c.z));
        const double need = c.dt - c.w_need * cw_cost;  // B/fr <= need
        const double fr_lo = need > 0.0 ? c.render_secs / need : 2.0;
        const double fr_hi =
            c.dt - c.k3 > 0.0 ? 1.0 - c.render_secs / (c.dt - c.k3) : -1.0;
        if (fr_lo <= fr_hi) {
          fr = std::clamp(fr, std::max(fr_lo, kLo), std::min(fr_hi, kHi));
          consider(fz, fr);
        }
      }
    }
    // Decode split: maximize A1*Hw(fz) + A2*Hx(fz).
    {
      const double fr = best.fr;
      const double a1 = (c.dt - c.render_secs / fr) / c.dt;
      const double a2 = (c.dt - c.k3 - c.render_secs / (1.0 - fr)) / c.dt;
      if (a1 > 0.0 && a2 >= 0.0) {
        const double s1 = std::sqrt(a1), s2 = std::sqrt(a2);
        double fz = c.cw * (s1 * (c.cx + c.z) - s2 * c.cx) /
                    (c.z * (s1 * c.cw + s2 * c.cx));
        // Feasibility floor: Q_w(fz) >= w_need at this fr.
        const double slack = (c.dt - c.render_secs / fr) / c.w_need;  // allowed c_w
        const double inv = slack / c.dt - 1.0 / c.cw;
        const double fz_lo = inv > 0.0 ? 1.0 / (c.z * inv) : 2.0;
        if (fz_lo <= kHi) {
          fz = std::clamp(fz, std::max(fz_lo, kLo), kHi);
          consider(fz, best.fr);
        }
      }
    }

    if (progress) progress->push_back(best.pool);
    if (best.pool - prev.pool <= 1e-13 * std::max(1.0, std::abs(best.pool))) break;
  }
  return best;
}

}  // namespace detail

// Eqs.-style per-user optimization for one GOP: sweep the raw set size k
// over tiles sorted by navigation-likelihood-weighted RD slope at R_max,
// solve the continuous rate/split problem exactly per k (pooled-budget
// water-filling), keep the best feasible k, then snap rates down to layer
// boundaries and re-verify feasibility.
inline PerUserAllocation optimize_per_user(const NavigationProfile& profile,
                                           const RdModel& model, const ScalableTileTable& table,
                                           const DeviceProfile& dev, const LinkBudget& links,
                                           double dt, double edge_decode_mbps,
                                           const SphericalWeights* weights = nullptr) {
  dev.validate();
  table.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("optimize: dt must be positive");
  if (!(links.cw_mbps > 0.0)) throw std::invalid_argument("optimize: cw must be positive");
  if (links.cx_mbps < 0.0 || edge_decode_mbps < 0.0)
    throw std::invalid_argument("optimize: negative capacity");

  const int nx = profile.p.nx(), ny = profile.p.ny();
  PerUserAllocation out;
  out.tiles = TileGrid<TileAlloc>(nx, ny);
  out.dual_link = true;

  std::vector<detail::OptTile> mtiles;
  std::vector<const RdTileParams*> mparams;
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) {
      const double p = profile.p.at(n, m);
      if (p <= 0.0) continue;
      const double scale = weights ? p * weights->w.at(n, m) : p;
      const RdTileParams& tp = model.tiles.at(n, m);
      mtiles.push_back({n, m, scale, table.r_min(n, m), table.r_max(n, m), tp.a, tp.b});
      mparams.push_back(&tp);
    }
  if (mtiles.empty()) throw std::invalid_argument("optimize: empty navigation profile");

  // Raw-set ordering: descending P (* w) |dD/dR| at R_max.
  std::vector<size_t> order(mtiles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    const double ci = mtiles[i].scale * model.abs_slope(mtiles[i].n, mtiles[i].m, mtiles[i].rmax);
    const double cj = mtiles[j].scale * model.abs_slope(mtiles[j].n, mtiles[j].m, mtiles[j].rmax);
    return ci > cj;
  });

  const double e_r_mbit = dev.raw_tile_bytes * kMbitPerByte;
  const double render_secs = dev.viewport_bytes / dev.render_bytes_per_s;
  double w_need = 0.0;
  for (const auto& t : mtiles) w_need += t.rmin;

  // Largest raw count whose transmission + server decode alone fit the GOP.
  int k_max = 0;
  {
    double raw_decode = 0.0;
    for (size_t k = 1; k <= mtiles.size(); ++k) {
      raw_decode += mtiles[order[k - 1]].rmax * dt;
      const double lhs = detail::safe_div(k * e_r_mbit, links.cx_mbps) +
                         detail::safe_div(raw_decode, edge_decode_mbps);
      if (lhs <= dt + 1e-12)
        k_max = static_cast<int>(k);
      else
        break;
    }
  }

  struct Candidate {
    int k = -1;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> totals;  // continuous T per M^e tile (order of mtiles index list)
    std::vector<size_t> enh;     // indices into mtiles
    detail::SplitPoint split;
    double raw_obj = 0.0, sum_rmax_raw = 0.0;
    std::vector<double> progress;
  } best;

  for (int k = 0; k <= k_max; ++k) {
    double raw_obj = 0.0, sum_rmax_raw = 0.0;
    for (int i = 0; i < k; ++i) {
      const auto& t = mtiles[order[i]];
      raw_obj += t.scale * model.eval(t.n, t.m, t.rmax);
      sum_rmax_raw += t.rmax;
    }
    std::vector<size_t> enh;
    for (size_t i = k; i < order.size(); ++i) enh.push_back(order[i]);
    std::sort(enh.begin(), enh.end());

    detail::SplitContext ctx;
    ctx.dt = dt;
    ctx.cw = links.cw_mbps;
    ctx.cx = std::max(links.cx_mbps, 1e-300);
    ctx.z = dev.decode_mbps;
    ctx.render_secs = render_secs;
    ctx.k3 = detail::safe_div(sum_rmax_raw * dt, edge_decode_mbps) +
             detail::safe_div(k * e_r_mbit, links.cx_mbps);
    ctx.w_need = w_need;

    std::vector<double> progress;
    const detail::SplitPoint sp = detail::optimize_splits(ctx, &progress);
    if (!sp.feasible) continue;

    double qw, qx;
    detail::pooled_budget(ctx, sp.fz, sp.fr, &qw, &qx);
    double raw_rmin = 0.0;
    for (int i = 0; i < k; ++i) raw_rmin += mtiles[order[i]].rmin;
    const double pool = (qw - raw_rmin) + std::max(qx, 0.0);

    std::vector<detail::OptTile> etiles;
    std::vector<const RdTileParams*> eparams;
    for (size_t idx : enh) {
      etiles.push_back(mtiles[idx]);
      eparams.push_back(mparams[idx]);
    }
    double obj = raw_obj;
    std::vector<double> totals;
    if (!etiles.empty()) {
      totals = detail::waterfill(etiles, eparams, model.kind, pool);
      for (size_t i = 0; i < etiles.size(); ++i)
        obj += etiles[i].scale * model.eval(etiles[i].n, etiles[i].m, totals[i]);
    }
    if (obj < best.objective - 1e-15) {
      best.k = k;
      best.objective = obj;
      best.totals = std::move(totals);
      best.enh = std::move(enh);
      best.split = sp;
      best.raw_obj = raw_obj;
      best.sum_rmax_raw = sum_rmax_raw;
      best.progress = std::move(progress);
    }
  }

  if (best.k < 0) {
    // Not even k = 0 admits a feasible point: report the minimal-rate chain
    // at the best-slack splits found on the scan grid.
    out.feasible = false;
    out.k_raw = 0;
    LatencyInputs li;
    li.sum_rw_mbps = w_need;
    li.sum_rx_mbps = 0.0;
    li.sum_rmax_raw_mbps = 0.0;
    li.raw_tiles = 0;
    li.dt = dt;
    li.cw_mbps = links.cw_mbps;
    li.cx_mbps = links.cx_mbps;
    li.edge_decode_mbps = edge_decode_mbps;
    li.splits.zw_mbps = 0.5 * dev.decode_mbps;
    li.splits.zx_mbps = 0.5 * dev.decode_mbps;
    li.splits.rw_bytes_per_s = 0.5 * dev.render_bytes_per_s;
    li.splits.rx_bytes_per_s = 0.5 * dev.render_bytes_per_s;
    li.raw_tile_bytes = dev.raw_tile_bytes;
    li.viewport_bytes = dev.viewport_bytes;
    out.splits = li.splits;
    out.latency = latency_chain(li);
    for (const auto& t : mtiles) {
      TileAlloc& ta = out.tiles.at(t.n, t.m);
      ta.in_m = true;
      ta.rw_mbps = ta.rw_cont_mbps = t.rmin;
    }
    return out;
  }

  // Recover per-tile (R_w, R_x) from the totals: baseline takes as much of
  // the chain-2 budget as it can, the remainder rides the xGen link.
  double qw, qx;
  {
    detail::SplitContext ctx;
    ctx.dt = dt;
    ctx.cw = links.cw_mbps;
    ctx.cx = std::max(links.cx_mbps, 1e-300);
    ctx.z = dev.decode_mbps;
    ctx.render_secs = render_secs;
    ctx.k3 = detail::safe_div(best.sum_rmax_raw * dt, edge_decode_mbps) +
             detail::safe_div(best.k * e_r_mbit, links.cx_mbps);
    ctx.w_need = w_need;
    detail::pooled_budget(ctx, best.split.fz, best.split.fr, &qw, &qx);
  }
  double raw_rmin = 0.0;
  for (int i = 0; i < best.k; ++i) raw_rmin += mtiles[order[i]].rmin;
  const double qw_enh = qw - raw_rmin;

  for (int i = 0; i < best.k; ++i) {
    const auto& t = mtiles[order[i]];
    TileAlloc& ta = out.tiles.at(t.n, t.m);
    ta.in_m = true;
    ta.raw = true;
    ta.rw_mbps = ta.rw_cont_mbps = t.rmin;  // base layer rides along for robustness
  }

  double sum_t = 0.0;
  for (double t : best.totals) sum_t += t;
  double shift_to_x = std::max(0.0, sum_t - qw_enh);  // volume the w pool cannot carry
  for (size_t i = 0; i < best.enh.size(); ++i) {
    const auto& t = mtiles[best.enh[i]];
    TileAlloc& ta = out.tiles.at(t.n, t.m);
    ta.in_m = true;
    const double total = best.totals[i];
    const double movable = total - t.rmin;
    const double x = std::min(movable, shift_to_x);
    shift_to_x -= x;
    ta.rw_cont_mbps = total - x;
    ta.rx_cont_mbps = x;
    // Snap the baseline down to a layer rate, then the total down to a
    // layer rate no further than rw_snap + the continuous enhancement
    // rate: both pool sums stay at or below their continuous values, so
    // the latency chains keep holding after the snap.
    const double rw_snap = table.snap_down(t.n, t.m, ta.rw_cont_mbps);
    const double total_snap =
        std::max(rw_snap, table.snap_down(t.n, t.m, rw_snap + ta.rx_cont_mbps));
    ta.rw_mbps = rw_snap;
    ta.rx_mbps = std::max(0.0, total_snap - rw_snap);
  }

  out.k_raw = best.k;
  out.objective_continuous = best.objective;
  out.split_search_progress = best.progress;
  out.splits.zw_mbps = best.split.fz * dev.decode_mbps;
  out.splits.zx_mbps = (1.0 - best.split.fz) * dev.decode_mbps;
  out.splits.rw_bytes_per_s = best.split.fr * dev.render_bytes_per_s;
  out.splits.rx_bytes_per_s = (1.0 - best.split.fr) * dev.render_bytes_per_s;

  LatencyInputs li;
  li.dt = dt;
  li.cw_mbps = links.cw_mbps;
  li.cx_mbps = links.cx_mbps;
  li.edge_decode_mbps = edge_decode_mbps;
  li.splits = out.splits;
  li.raw_tile_bytes = dev.raw_tile_bytes;
  li.viewport_bytes = dev.viewport_bytes;
  li.raw_tiles = best.k;
  li.sum_rmax_raw_mbps = best.sum_rmax_raw;
  for (const auto& ta : out.tiles) {
    li.sum_rw_mbps += ta.rw_mbps;
    li.sum_rx_mbps += ta.rx_mbps;
  }
  out.latency = latency_chain(li);
  out.feasible = out.latency.baseline_chain() <= dt + 1e-9 &&
                 out.latency.enhancement_chain() <= dt + 1e-9;
  out.expected_distortion = expected_distortion(out, model, profile, table, weights);
  return out;
}

// Single-link (xGen only) variant used by the PropNoWiFi and LiFi methods:
// the whole stream rides the xGen link, full decode and render budgets.
inline PerUserAllocation optimize_single_link_x(const NavigationProfile& profile,
                                                const RdModel& model,
                                                const ScalableTileTable& table,
                                                const DeviceProfile& dev, double cx_mbps,
                                                double dt, double edge_decode_mbps,
                                                const SphericalWeights* weights = nullptr) {
  dev.validate();
  table.validate();
  const int nx = profile.p.nx(), ny = profile.p.ny();
  PerUserAllocation out;
  out.tiles = TileGrid<TileAlloc>(nx, ny);
  out.dual_link = false;

  std::vector<detail::OptTile> mtiles;
  std::vector<const RdTileParams*> mparams;
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) {
      const double p = profile.p.at(n, m);
      if (p <= 0.0) continue;
      const double scale = weights ? p * weights->w.at(n, m) : p;
      const RdTileParams& tp = model.tiles.at(n, m);
      mtiles.push_back({n, m, scale, table.r_min(n, m), table.r_max(n, m), tp.a, tp.b});
      mparams.push_back(&tp);
    }
  if (mtiles.empty()) throw std::invalid_argument("optimize: empty navigation profile");

  std::vector<size_t> order(mtiles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    const double ci = mtiles[i].scale * model.abs_slope(mtiles[i].n, mtiles[i].m, mtiles[i].rmax);
    const double cj = mtiles[j].scale * model.abs_slope(mtiles[j].n, mtiles[j].m, mtiles[j].rmax);
    return ci > cj;
  });

  const double e_r_mbit = dev.raw_tile_bytes * kMbitPerByte;
  const double render_secs = dev.viewport_bytes / dev.render_bytes_per_s;
  const double cx_cost = dt * (1.0 / std::max(cx_mbps, 1e-300) + 1.0 / dev.decode_mbps);

  int k_max = 0;
  {
    double raw_decode = 0.0;
    for (size_t k = 1; k <= mtiles.size(); ++k) {
      raw_decode += mtiles[order[k - 1]].rmax * dt;
      const double lhs = detail::safe_div(k * e_r_mbit, cx_mbps) +
                         detail::safe_div(raw_decode, edge_decode_mbps);
      if (lhs <= dt + 1e-12)
        k_max = static_cast<int>(k);
      else
        break;
    }
  }

  struct Candidate {
    int k = -1;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> totals;
    std::vector<size_t> enh;
    double sum_rmax_raw = 0.0;
  } best;

  for (int k = 0; k <= k_max; ++k) {
    double raw_obj = 0.0, sum_rmax_raw = 0.0;
    for (int i = 0; i < k; ++i) {
      const auto& t = mtiles[order[i]];
      raw_obj += t.scale * model.eval(t.n, t.m, t.rmax);
      sum_rmax_raw += t.rmax;
    }
    const double k3 = detail::safe_div(sum_rmax_raw * dt, edge_decode_mbps) +
                      detail::safe_div(k * e_r_mbit, cx_mbps);
    const double budget = (dt - k3 - render_secs) / cx_cost;

    std::vector<size_t> enh;
    for (size_t i = k; i < order.size(); ++i) enh.push_back(order[i]);
    std::sort(enh.begin(), enh.end());

    std::vector<detail::OptTile> etiles;
    std::vector<const RdTileParams*> eparams;
    double need = 0.0;
    for (size_t idx : enh) {
      etiles.push_back(mtiles[idx]);
      eparams.push_back(mparams[idx]);
      need += mtiles[idx].rmin;
    }
    if (budget < need - 1e-12) continue;

    double obj = raw_obj;
    std::vector<double> totals;
    if (!etiles.empty()) {
      totals = detail::waterfill(etiles, eparams, model.kind, budget);
      for (size_t i = 0; i < etiles.size(); ++i)
        obj += etiles[i].scale * model.eval(etiles[i].n, etiles[i].m, totals[i]);
    }
    if (obj < best.objective - 1e-15) {
      best = {k, obj, std::move(totals), std::move(enh), sum_rmax_raw};
    }
  }

  if (best.k < 0) {
    out.feasible = false;
    for (const auto& t : mtiles) {
      TileAlloc& ta = out.tiles.at(t.n, t.m);
      ta.in_m = true;
      ta.rx_mbps = ta.rx_cont_mbps = t.rmin;
    }
    LatencyInputs li;
    li.dt = dt;
    li.cx_mbps = cx_mbps;
    li.edge_decode_mbps = edge_decode_mbps;
    li.sum_rx_mbps = 0.0;
    li.splits.zx_mbps = dev.decode_mbps;
    li.splits.rx_bytes_per_s = dev.render_bytes_per_s;
    li.raw_tile_bytes = dev.raw_tile_bytes;
    li.viewport_bytes = dev.viewport_bytes;
    out.splits = li.splits;
    out.latency = latency_chain(li);
    return out;
  }

  for (int i = 0; i < best.k; ++i) {
    const auto& t = mtiles[order[i]];
    TileAlloc& ta = out.tiles.at(t.n, t.m);
    ta.in_m = true;
    ta.raw = true;
  }
  for (size_t i = 0; i < best.enh.size(); ++i) {
    const auto& t = mtiles[best.enh[i]];
    TileAlloc& ta = out.tiles.at(t.n, t.m);
    ta.in_m = true;
    ta.rx_cont_mbps = best.totals[i];
    ta.rx_mbps = table.snap_down(t.n, t.m, best.totals[i]);
  }

  out.k_raw = best.k;
  out.objective_continuous = best.objective;
  out.splits.zx_mbps = dev.decode_mbps;
  out.splits.rx_bytes_per_s = dev.render_bytes_per_s;

  LatencyInputs li;
  li.dt = dt;
  li.cx_mbps = cx_mbps;
  li.edge_decode_mbps = edge_decode_mbps;
  li.splits = out.splits;
  li.raw_tile_bytes = dev.raw_tile_bytes;
  li.viewport_bytes = dev.viewport_bytes;
  li.raw_tiles = best.k;
  li.sum_rmax_raw_mbps = best.sum_rmax_raw;
  for (const auto& ta : out.tiles) li.sum_rx_mbps += ta.rx_mbps;
  out.latency = latency_chain(li);
  out.latency.tau_rw = 0.0;  // no baseline render task on a single link
  out.feasible = out.latency.enhancement_chain() <= dt + 1e-9;
  out.expected_distortion = expected_distortion(out, model, profile, table, weights);
  return out;
}

// ---------------------------------------------------------------------------
// Multi-user orchestration (decoupled MU-OPT)
// ---------------------------------------------------------------------------

struct SystemBudgets {
  double edge_decode_mbps = 0.0;     // Z
  double wifi_total_mbps = 0.0;      // C^w
  std::vector<double> xgen_tx_mbps;  // C^{x,t} per transmitter
};

// Decoupling per the characteristic system setting: Z_u = Z/N_u,
// C_u^w = C^w/N_u, and each transmitter's capacity split evenly across the
// users assigned to it (exclusive when one user per transmitter). The
// multi-user objective then separates into independent per-user solves.
inline std::vector<PerUserAllocation> optimize_multi_user(
    const std::vector<NavigationProfile>& profiles, const std::vector<const RdModel*>& models,
    const std::vector<const ScalableTileTable*>& tables, const DeviceProfile& dev,
    const SystemBudgets& budgets, const std::vector<int>& tx_of_user, double dt,
    const SphericalWeights* weights = nullptr) {
  const size_t nu = profiles.size();
  if (models.size() != nu || tables.size() != nu || tx_of_user.size() != nu)
    throw std::invalid_argument("multi_user: input size mismatch");

  std::vector<int> users_on_tx(budgets.xgen_tx_mbps.size(), 0);
  for (int t : tx_of_user) {
    if (t < 0 || t >= static_cast<int>(budgets.xgen_tx_mbps.size()))
      throw std::invalid_argument("multi_user: assignment references unknown transmitter");
    ++users_on_tx[t];
  }

  std::vector<PerUserAllocation> out;
  out.reserve(nu);
  for (size_t u = 0; u < nu; ++u) {
    LinkBudget links;
    links.cw_mbps = budgets.wifi_total_mbps / static_cast<double>(nu);
    links.cx_mbps = budgets.xgen_tx_mbps[tx_of_user[u]] / users_on_tx[tx_of_user[u]];
    const double zu = budgets.edge_decode_mbps / static_cast<double>(nu);
    out.push_back(
        optimize_per_user(profiles[u], *models[u], *tables[u], dev, links, dt, zu, weights));
  }
  return out;
}

}  // namespace arena360
