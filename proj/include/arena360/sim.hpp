#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "arena360/assignment.hpp"
#include "arena360/channel.hpp"
#include "arena360/geometry.hpp"
#include "arena360/navigation.hpp"
#include "arena360/optimizer.hpp"
#include "arena360/rdmodel.hpp"

namespace arena360 {

enum class Method { proposed, prop_no_wifi, lifi, dash };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::prop_no_wifi: return "prop_no_wifi";
    case Method::lifi: return "lifi";
    case Method::dash: return "dash";
  }
  return "?";
}

enum class AssignmentObjective { distance, max_min_snr };

// Fully resolved simulation inputs; file references are loaded by the
// scenario module before a session starts.
struct Scenario {
  TilingConfig tiling;
  Arena arena;
  ChannelParams channel;
  DropoutModel dropout;
  std::vector<NavigationTrace> traces;        // one per user
  std::vector<RdModel> viewpoint_models;      // one per spatial viewpoint
  std::vector<ScalableTileTable> viewpoint_tables;
  DeviceProfile device;
  SystemBudgets budgets;
  Method method = Method::proposed;
  double gop_duration = 1.0;
  double frame_rate = 30.0;
  int n_gops = 10;
  int prediction_lag_gops = 1;
  int reassign_period_gops = 1;
  double reassign_hysteresis = 0.0;
  AssignmentObjective assignment_objective = AssignmentObjective::distance;
  double floor_mse = 255.0 * 255.0 / 4.0;  // unserved viewport content
  bool use_ws_weights = true;
  bool cx_from_channel = false;  // cap per-user C^x by the link capacity
  std::uint64_t seed = 1;

  void validate() const {
    tiling.validate();
    arena.validate();
    dropout.validate();
    device.validate();
    if (traces.empty()) throw std::invalid_argument("scenario: no users");
    if (viewpoint_models.empty()) throw std::invalid_argument("scenario: no viewpoints");
    if (viewpoint_models.size() != viewpoint_tables.size())
      throw std::invalid_argument("scenario: model/table count mismatch");
    if (n_gops <= 0) throw std::invalid_argument("scenario: nonpositive session length");
    if (!(floor_mse > 0.0)) throw std::invalid_argument("scenario: nonpositive floor mse");
    if (budgets.xgen_tx_mbps.size() != arena.transmitters.size())
      throw std::invalid_argument("scenario: xgen budget per transmitter required");
  }
};

struct GopMetrics {
  int gop = 0;
  int user = 0;
  Method method = Method::proposed;
  double mse = 0.0;
  double psnr_db = 0.0;
  double wspsnr_db = 0.0;
  double rate_mbps = 0.0;
  bool downtime = false;
  bool infeasible = false;
  int k_raw = 0;
  int tx_id = -1;
  LatencyBreakdown latency;
};

struct SessionSummary {
  double psnr_mean = 0.0, psnr_std = 0.0;
  double wspsnr_mean = 0.0, wspsnr_std = 0.0;
  double rate_mean = 0.0, rate_std = 0.0;
  double downtime_pct = 0.0;
};

struct SessionResult {
  std::vector<GopMetrics> gops;
  SessionSummary summary;
  int infeasible_allocations = 0;
};

struct ViewportScore {
  double mse = 0.0;
  double psnr_db = 0.0;
  double wspsnr_db = 0.0;
};

// Realized viewport quality: delivered per-tile distortion aggregated over
// the realized navigation profile; WS-PSNR applies the spherical weights.
inline ViewportScore score_viewport(const NavigationProfile& realized,
                                    const TileGrid<double>& delivered_mse,
                                    const SphericalWeights& weights) {
  double mse = 0.0, ws_mse = 0.0;
  for (int m = 0; m < realized.p.ny(); ++m)
    for (int n = 0; n < realized.p.nx(); ++n) {
      const double p = realized.p.at(n, m);
      if (p <= 0.0) continue;
      mse += p * delivered_mse.at(n, m);
      ws_mse += p * weights.w.at(n, m) * delivered_mse.at(n, m);
    }
  ViewportScore s;
  s.mse = mse;
  s.psnr_db = psnr_from_mse(mse);
  s.wspsnr_db = psnr_from_mse(ws_mse);
  return s;
}

// MPEG-DASH style reference: single traditional link, the cumulative layer
// points treated as independent representations. Predicted-viewport tiles
// take the highest representation that fits after reserving the lowest one
// for every other tile; processed in descending likelihood order.
struct DashSelection {
  TileGrid<int> rep;  // 1..L for every tile
  double rate_mbps = 0.0;
  bool feasible = false;
};

inline DashSelection dash_select(const NavigationProfile& predicted,
                                 const ScalableTileTable& table, double budget_mbps) {
  const int nx = predicted.p.nx(), ny = predicted.p.ny();
  DashSelection out;
  out.rep = TileGrid<int>(nx, ny, 1);

  double min_total = 0.0;
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) min_total += table.r_min(n, m);
  if (min_total > budget_mbps + 1e-9) {
    out.feasible = false;
    out.rate_mbps = min_total;
    return out;
  }

  struct Cand {
    int n, m;
    double p;
  };
  std::vector<Cand> viewport;
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n)
      if (predicted.p.at(n, m) > 0.0) viewport.push_back({n, m, predicted.p.at(n, m)});
  std::stable_sort(viewport.begin(), viewport.end(),
                   [](const Cand& a, const Cand& b) { return a.p > b.p; });

  double spent = min_total;  // every tile reserved at the lowest representation
  for (const Cand& c : viewport) {
    const auto& layers = table.tiles.at(c.n, c.m);
    int pick = 1;
    for (int l = table.layers; l >= 1; --l) {
      const double extra = layers.rate_mbps[l - 1] - layers.rate_mbps.front();
      if (spent + extra <= budget_mbps + 1e-9) {
        pick = l;
        break;
      }
    }
    out.rep.at(c.n, c.m) = pick;
    spent += layers.rate_mbps[pick - 1] - layers.rate_mbps.front();
  }
  out.rate_mbps = spent;
  out.feasible = true;
  return out;
}

inline SessionResult run_session(const Scenario& sc) {
  sc.validate();
  const int nu = static_cast<int>(sc.traces.size());
  const int nt = static_cast<int>(sc.arena.transmitters.size());
  for (const auto& tr : sc.traces) tr.validate();

  const SphericalWeights weights = spherical_tile_weights(sc.tiling);
  std::mt19937_64 rng(sc.seed);
  ReassignmentPolicy reassign(sc.reassign_period_gops, sc.reassign_hysteresis);
  SteerState steer_state;

  std::vector<std::array<double, 2>> viewpoints = sc.arena.viewpoints;
  if (viewpoints.empty()) viewpoints.push_back({sc.arena.width / 2.0, sc.arena.depth / 2.0});

  SessionResult result;
  result.gops.reserve(static_cast<size_t>(sc.n_gops) * nu);

  for (int g = 0; g < sc.n_gops; ++g) {
    const GopInterval iv{g * sc.gop_duration, sc.gop_duration, sc.frame_rate};

    // (1) user state at the GOP start
    std::vector<std::array<double, 2>> user_xy(nu);
    for (int u = 0; u < nu; ++u) {
      const TraceSample& s = sc.traces[u].at(iv.t_start);
      user_xy[u] = {s.x, s.y};
    }

    // (2) active spatial viewpoint per user
    std::vector<int> vp(nu, 0);
    for (int u = 0; u < nu; ++u)
      vp[u] = active_viewpoint(sc.traces[u], iv.t_start, viewpoints);

    // (3) transmitter assignment
    std::vector<int> tx_of_user(nu, 0);
    if (sc.method == Method::dash) {
      std::fill(tx_of_user.begin(), tx_of_user.end(), -1);
    } else if (sc.method == Method::lifi) {
      // LiFi: each user takes the transmitter with the best SNR, no matching.
      for (int u = 0; u < nu; ++u) {
        double best_snr = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < nt; ++t) {
          AimedTx serving{&sc.arena.transmitters[t], user_xy[u][0], user_xy[u][1]};
          const LinkState ls = xgen_link(serving, user_xy[u][0], user_xy[u][1], {}, sc.channel);
          const double snr = ls.aligned ? ls.snr_db : -std::numeric_limits<double>::infinity();
          if (snr > best_snr) {
            best_snr = snr;
            tx_of_user[u] = t;
          }
        }
      }
    } else {
      AssignmentProblem prob;
      prob.w.assign(nu, std::vector<double>(nt, 0.0));
      for (int u = 0; u < nu; ++u)
        for (int t = 0; t < nt; ++t) {
          const Transmitter& tx = sc.arena.transmitters[t];
          if (sc.assignment_objective == AssignmentObjective::distance) {
            const double dz = tx.z - sc.channel.rx_height_m;
            prob.w[u][t] =
                std::sqrt(dz * dz + (tx.x - user_xy[u][0]) * (tx.x - user_xy[u][0]) +
                          (tx.y - user_xy[u][1]) * (tx.y - user_xy[u][1]));
          } else {
            AimedTx serving{&tx, user_xy[u][0], user_xy[u][1]};
            const LinkState ls = xgen_link(serving, user_xy[u][0], user_xy[u][1], {}, sc.channel);
            prob.w[u][t] = ls.aligned ? -ls.snr_db : std::numeric_limits<double>::max() / 2;
          }
        }
      tx_of_user = reassign.step(prob).tx_of_user;
    }

    // (4) link states and dropout; the allocator plans against the
    // pre-drop link capacity (the server cannot foresee the outage)
    std::vector<bool> aligned(nu, true);
    std::vector<LinkState> xlinks(nu);
    std::vector<double> planned_capacity(nu, 0.0);
    if (sc.method != Method::dash) {
      aligned = steer(sc.arena, tx_of_user, user_xy, sc.channel, sc.gop_duration, steer_state);
      std::vector<AimedTx> aims;
      aims.reserve(nu);
      for (int u = 0; u < nu; ++u)
        aims.push_back({&sc.arena.transmitters[tx_of_user[u]], user_xy[u][0], user_xy[u][1]});
      for (int u = 0; u < nu; ++u) {
        xlinks[u] = xgen_link(aims[u], user_xy[u][0], user_xy[u][1], aims, sc.channel);
        xlinks[u].aligned = xlinks[u].aligned && aligned[u];
        if (!xlinks[u].aligned) xlinks[u].capacity_mbps = 0.0;
        planned_capacity[u] = xlinks[u].capacity_mbps;
      }
    }
    std::vector<bool> dropped(nu, false);
    for (int u = 0; u < nu; ++u) {
      dropped[u] = sample_dropout(sc.dropout, sc.traces[u], iv, g, rng);
      if (sc.method != Method::dash && dropped[u]) {
        xlinks[u].dropped = true;
        xlinks[u].capacity_mbps = 0.0;
      }
    }

    // (5) predicted profiles at the configured knowledge lag
    std::vector<NavigationProfile> predicted;
    std::vector<NavigationProfile> realized;
    predicted.reserve(nu);
    realized.reserve(nu);
    for (int u = 0; u < nu; ++u) {
      const double knowledge_t =
          std::max(sc.traces[u].t_begin(), iv.t_start - sc.prediction_lag_gops * sc.gop_duration);
      predicted.push_back(predict_profile_at(sc.traces[u], knowledge_t, iv, sc.tiling));
      realized.push_back(profile_for_interval(sc.traces[u], iv, sc.tiling));
    }

    // (6) per-user allocation for the method
    const SphericalWeights* wopt = sc.use_ws_weights ? &weights : nullptr;
    std::vector<PerUserAllocation> allocs(nu);
    std::vector<DashSelection> dash(nu);
    std::vector<int> users_on_tx(nt, 0);
    if (sc.method != Method::dash)
      for (int u = 0; u < nu; ++u) ++users_on_tx[tx_of_user[u]];

    for (int u = 0; u < nu; ++u) {
      const RdModel& model = sc.viewpoint_models[vp[u]];
      const ScalableTileTable& table = sc.viewpoint_tables[vp[u]];
      const double zu = sc.budgets.edge_decode_mbps / nu;
      double cx = 0.0;
      if (sc.method != Method::dash) {
        cx = sc.budgets.xgen_tx_mbps[tx_of_user[u]] / users_on_tx[tx_of_user[u]];
        if (sc.cx_from_channel) cx = std::min(cx, planned_capacity[u]);
      }
      switch (sc.method) {
        case Method::proposed: {
          LinkBudget links{sc.budgets.wifi_total_mbps / nu, cx};
          allocs[u] = optimize_per_user(predicted[u], model, table, sc.device, links,
                                        sc.gop_duration, zu, wopt);
          break;
        }
        case Method::prop_no_wifi:
        case Method::lifi: {
          allocs[u] = optimize_single_link_x(predicted[u], model, table, sc.device, cx,
                                             sc.gop_duration, zu, wopt);
          break;
        }
        case Method::dash: {
          dash[u] = dash_select(predicted[u], table, sc.budgets.wifi_total_mbps / nu);
          break;
        }
      }
    }

    // (7)+(8) realize delivery and score against the realized profile
    for (int u = 0; u < nu; ++u) {
      const RdModel& model = sc.viewpoint_models[vp[u]];
      const ScalableTileTable& table = sc.viewpoint_tables[vp[u]];
      const bool x_delivered =
          sc.method != Method::dash && xlinks[u].aligned && !xlinks[u].dropped;

      GopMetrics gm;
      gm.gop = g;
      gm.user = u;
      gm.method = sc.method;
      gm.tx_id = sc.method == Method::dash ? -1 : sc.arena.transmitters[tx_of_user[u]].id;

      TileGrid<double> delivered(sc.tiling.tiles_x, sc.tiling.tiles_y, sc.floor_mse);
      double rate = 0.0;
      bool downtime = false;
      bool infeasible = false;

      switch (sc.method) {
        case Method::dash: {
          if (!dash[u].feasible) {
            infeasible = true;
            downtime = true;
            break;
          }
          for (int m = 0; m < sc.tiling.tiles_y; ++m)
            for (int n = 0; n < sc.tiling.tiles_x; ++n) {
              const double r = table.tiles.at(n, m).rate_mbps[dash[u].rep.at(n, m) - 1];
              delivered.at(n, m) = model.eval(n, m, r);
            }
          rate = dash[u].rate_mbps;
          break;
        }
        case Method::proposed: {
          const PerUserAllocation& al = allocs[u];
          if (!al.feasible) {
            infeasible = true;
            downtime = true;
            break;
          }
          gm.k_raw = al.k_raw;
          gm.latency = al.latency;
          for (int m = 0; m < sc.tiling.tiles_y; ++m)
            for (int n = 0; n < sc.tiling.tiles_x; ++n) {
              const TileAlloc& ta = al.tiles.at(n, m);
              if (!ta.in_m) continue;
              double r;
              if (x_delivered)
                r = ta.raw ? table.r_max(n, m) : ta.rw_mbps + ta.rx_mbps;
              else
                r = ta.rw_mbps;  // baseline layer still lands over the traditional link
              delivered.at(n, m) = model.eval(n, m, r);
              rate += ta.rw_mbps;
              if (x_delivered)
                rate += ta.rx_mbps +
                        (ta.raw ? sc.device.raw_tile_bytes * kMbitPerByte / sc.gop_duration : 0.0);
            }
          break;
        }
        case Method::prop_no_wifi:
        case Method::lifi: {
          const PerUserAllocation& al = allocs[u];
          if (!al.feasible) {
            infeasible = true;
            downtime = true;
            break;
          }
          gm.k_raw = al.k_raw;
          gm.latency = al.latency;
          if (!x_delivered) {
            downtime = true;  // the single link carried everything
            break;
          }
          for (int m = 0; m < sc.tiling.tiles_y; ++m)
            for (int n = 0; n < sc.tiling.tiles_x; ++n) {
              const TileAlloc& ta = al.tiles.at(n, m);
              if (!ta.in_m) continue;
              const double r = ta.raw ? table.r_max(n, m) : ta.rx_mbps;
              delivered.at(n, m) = model.eval(n, m, r);
              rate += ta.rx_mbps +
                      (ta.raw ? sc.device.raw_tile_bytes * kMbitPerByte / sc.gop_duration : 0.0);
            }
          break;
        }
      }

      const ViewportScore score = score_viewport(realized[u], delivered, weights);
      gm.mse = score.mse;
      gm.psnr_db = score.psnr_db;
      gm.wspsnr_db = score.wspsnr_db;
      gm.rate_mbps = downtime && sc.method != Method::proposed ? 0.0 : rate;
      gm.downtime = downtime;
      gm.infeasible = infeasible;
      if (infeasible) ++result.infeasible_allocations;
      result.gops.push_back(gm);
    }
  }

  // Session summary across users and GOPs.
  auto mean_std = [](const std::vector<double>& xs, double* mean, double* sd) {
    double s = 0.0;
    for (double x : xs) s += x;
    *mean = s / xs.size();
    double v = 0.0;
    for (double x : xs) v += (x - *mean) * (x - *mean);
    *sd = xs.size() > 1 ? std::sqrt(v / (xs.size() - 1)) : 0.0;
  };
  std::vector<double> psnr, ws, rate;
  int down = 0;
  for (const GopMetrics& g : result.gops) {
    psnr.push_back(g.psnr_db);
    ws.push_back(g.wspsnr_db);
    rate.push_back(g.rate_mbps);
    if (g.downtime) ++down;
  }
  mean_std(psnr, &result.summary.psnr_mean, &result.summary.psnr_std);
  mean_std(ws, &result.summary.wspsnr_mean, &result.summary.wspsnr_std);
  mean_std(rate, &result.summary.rate_mean, &result.summary.rate_std);
  result.summary.downtime_pct = 100.0 * down / result.gops.size();
  return result;
}

// ---------------------------------------------------------------------------
// CSV emission (stable formatting so sessions are byte-reproducible)
// ---------------------------------------------------------------------------

namespace detail {

inline void append_num(std::string& out, double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  out += buf;
}

}  // namespace detail

inline std::string metrics_csv(const std::vector<GopMetrics>& gops) {
  std::string out =
      "gop,user,method,psnr_db,wspsnr_db,rate_mbps,downtime,k_raw,tx_id,"
      "tau_w,tau_Z,tau_x,tau_zw,tau_zx,tau_rw,tau_rx\n";
  for (const GopMetrics& g : gops) {
    out += std::to_string(g.gop) + ',' + std::to_string(g.user) + ',';
    out += method_name(g.method);
    out += ',';
    detail::append_num(out, g.psnr_db, 6);
    out += ',';
    detail::append_num(out, g.wspsnr_db, 6);
    out += ',';
    detail::append_num(out, g.rate_mbps, 6);
    out += ',';
    out += g.downtime ? '1' : '0';
    out += ',' + std::to_string(g.k_raw) + ',' + std::to_string(g.tx_id) + ',';
    const double taus[7] = {g.latency.tau_w,  g.latency.tau_Z,  g.latency.tau_x,
                            g.latency.tau_zw, g.latency.tau_zx, g.latency.tau_rw,
                            g.latency.tau_rx};
    for (int i = 0; i < 7; ++i) {
      detail::append_num(out, taus[i], 9);
      out += i + 1 < 7 ? ',' : '\n';
    }
  }
  return out;
}

inline std::string summary_csv(Method method, const SessionSummary& s) {
  std::string out =
      "method,psnr_mean,psnr_std,wspsnr_mean,wspsnr_std,rate_mean,rate_std,downtime_pct\n";
  out += method_name(method);
  const double vals[7] = {s.psnr_mean, s.psnr_std,  s.wspsnr_mean, s.wspsnr_std,
                          s.rate_mean, s.rate_std,  s.downtime_pct};
  for (double v : vals) {
    out += ',';
    detail::append_num(out, v, 6);
  }
  out += '\n';
  return out;
}

}  // namespace arena360
