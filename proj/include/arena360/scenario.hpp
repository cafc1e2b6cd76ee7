#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "arena360/csv.hpp"
#include "arena360/sim.hpp"

namespace arena360 {

// Strict scenario file loading: unknown keys are rejected with the JSON
// pointer of the offending entry, so typos cannot silently fall back to
// defaults.

namespace scen {

using nlohmann::json;

inline void require_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& known) {
  if (!obj.is_object()) throw data_error(path + ": expected object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) throw data_error(path + "/" + it.key() + ": unknown key");
}

template <typename T>
T get(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw data_error(path + "/" + key + ": wrong type");
  }
}

template <typename T>
T get_required(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw data_error(path + "/" + key + ": missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw data_error(path + "/" + key + ": wrong type");
  }
}

inline Method parse_method(const std::string& s, const std::string& path) {
  if (s == "proposed") return Method::proposed;
  if (s == "prop_no_wifi") return Method::prop_no_wifi;
  if (s == "lifi") return Method::lifi;
  if (s == "dash") return Method::dash;
  throw data_error(path + ": unknown method '" + s + "'");
}

inline TxTech parse_tech(const std::string& s, const std::string& path) {
  if (s == "vlc") return TxTech::vlc;
  if (s == "mmwave") return TxTech::mmwave;
  throw data_error(path + ": unknown tech '" + s + "'");
}

inline Steering parse_steering(const std::string& s, const std::string& path) {
  if (s == "electronic_switch") return Steering::electronic_switch;
  if (s == "mechanical") return Steering::mechanical;
  if (s == "hybrid") return Steering::hybrid;
  if (s == "beamform") return Steering::beamform;
  throw data_error(path + ": unknown steering '" + s + "'");
}

}  // namespace scen

inline Scenario load_scenario_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir) {
  using scen::get;
  using scen::get_required;
  using scen::require_keys;

  require_keys(j, "", {"seed", "method", "gop", "session", "tiling", "arena", "users", "rd",
                       "device", "budgets", "channel", "dropout", "assignment", "prediction",
                       "scoring"});

  Scenario sc;
  sc.seed = get<std::uint64_t>(j, "", "seed", 1);
  sc.method = scen::parse_method(get<std::string>(j, "", "method", "proposed"), "/method");

  {
    const auto& g = j.at("gop");
    require_keys(g, "/gop", {"duration_s", "frame_rate"});
    sc.gop_duration = get_required<double>(g, "/gop", "duration_s");
    sc.frame_rate = get_required<double>(g, "/gop", "frame_rate");
  }
  {
    const auto& s = j.at("session");
    require_keys(s, "/session", {"gops"});
    sc.n_gops = get_required<int>(s, "/session", "gops");
  }
  {
    const auto& t = j.at("tiling");
    require_keys(t, "/tiling", {"panorama_width", "panorama_height", "tiles_x", "tiles_y",
                                "fov_h_deg", "fov_v_deg", "raster_grid"});
    sc.tiling.panorama_width = get_required<int>(t, "/tiling", "panorama_width");
    sc.tiling.panorama_height = get_required<int>(t, "/tiling", "panorama_height");
    sc.tiling.tiles_x = get_required<int>(t, "/tiling", "tiles_x");
    sc.tiling.tiles_y = get_required<int>(t, "/tiling", "tiles_y");
    sc.tiling.fov_h_deg = get<double>(t, "/tiling", "fov_h_deg", 90.0);
    sc.tiling.fov_v_deg = get<double>(t, "/tiling", "fov_v_deg", 90.0);
    sc.tiling.raster_grid = get<int>(t, "/tiling", "raster_grid", 256);
    sc.tiling.validate();
  }
  {
    const auto& a = j.at("arena");
    require_keys(a, "/arena", {"width_m", "depth_m", "ceiling_height_m", "cells_x", "cells_y",
                               "transmitters", "auto_provision", "tech", "steering",
                               "viewpoints"});
    sc.arena.width = get_required<double>(a, "/arena", "width_m");
    sc.arena.depth = get_required<double>(a, "/arena", "depth_m");
    sc.arena.ceiling_height = get<double>(a, "/arena", "ceiling_height_m", 3.0);
    sc.arena.cells_x = get_required<int>(a, "/arena", "cells_x");
    sc.arena.cells_y = get_required<int>(a, "/arena", "cells_y");
    if (a.contains("viewpoints")) {
      for (size_t i = 0; i < a.at("viewpoints").size(); ++i) {
        const auto& vp = a.at("viewpoints").at(i);
        if (!vp.is_array() || vp.size() != 2)
          throw data_error("/arena/viewpoints/" + std::to_string(i) + ": expected [x, y]");
        sc.arena.viewpoints.push_back({vp.at(0).get<double>(), vp.at(1).get<double>()});
      }
    }
    if (a.contains("transmitters")) {
      for (size_t i = 0; i < a.at("transmitters").size(); ++i) {
        const auto& tj = a.at("transmitters").at(i);
        const std::string p = "/arena/transmitters/" + std::to_string(i);
        require_keys(tj, p, {"id", "x", "y", "z", "tech", "steering"});
        Transmitter tx;
        tx.id = get_required<int>(tj, p, "id");
        tx.x = get_required<double>(tj, p, "x");
        tx.y = get_required<double>(tj, p, "y");
        tx.z = get<double>(tj, p, "z", sc.arena.ceiling_height);
        tx.tech = scen::parse_tech(get<std::string>(tj, p, "tech", "vlc"), p + "/tech");
        tx.steering =
            scen::parse_steering(get<std::string>(tj, p, "steering", "mechanical"),
                                 p + "/steering");
        sc.arena.transmitters.push_back(tx);
      }
    }
  }

  // Users and traces
  {
    const auto& users = j.at("users");
    if (!users.is_array() || users.empty()) throw data_error("/users: expected nonempty array");
    for (size_t i = 0; i < users.size(); ++i) {
      const auto& uj = users.at(i);
      const std::string p = "/users/" + std::to_string(i);
      require_keys(uj, p, {"id", "trace"});
      const std::string rel = get_required<std::string>(uj, p, "trace");
      const std::filesystem::path tp = base_dir / rel;
      sc.traces.push_back(load_trace_csv(tp.string(), "user" + std::to_string(i)));
    }
  }

  // Auto provisioning: ceil(N_u/N_c) transmitters above each cell center.
  {
    const auto& a = j.at("arena");
    const bool auto_prov = get<bool>(a, "/arena", "auto_provision", false);
    if (auto_prov) {
      if (!sc.arena.transmitters.empty())
        throw data_error("/arena: auto_provision with explicit transmitters");
      const std::string tech = get<std::string>(a, "/arena", "tech", "vlc");
      const std::string steering = get<std::string>(a, "/arena", "steering", "mechanical");
      const int nu = static_cast<int>(sc.traces.size());
      const int nc = sc.arena.cell_count();
      const int per_cell = (nu + nc - 1) / nc;
      int id = 0;
      for (int c = 0; c < nc; ++c) {
        const auto center = sc.arena.cell_center(c);
        for (int k = 0; k < per_cell; ++k) {
          Transmitter tx;
          tx.id = id++;
          tx.x = center[0];
          tx.y = center[1];
          tx.z = sc.arena.ceiling_height;
          tx.tech = scen::parse_tech(tech, "/arena/tech");
          tx.steering = scen::parse_steering(steering, "/arena/steering");
          sc.arena.transmitters.push_back(tx);
        }
      }
    }
  }

  // Rate-distortion source
  {
    const auto& rd = j.at("rd");
    require_keys(rd, "/rd", {"source", "seed", "a_range", "b_range", "path", "kind", "layers",
                             "r_min_mbps", "r_max_mbps"});
    const std::string source = get_required<std::string>(rd, "/rd", "source");
    const int layers = get<int>(rd, "/rd", "layers", 4);
    const double r_min = get<double>(rd, "/rd", "r_min_mbps", 1.0);
    const double r_max = get<double>(rd, "/rd", "r_max_mbps", 8.0);
    const size_t n_vp = std::max<size_t>(1, sc.arena.viewpoints.size());

    if (source == "synthetic") {
      const std::uint64_t rd_seed = get<std::uint64_t>(rd, "/rd", "seed", 7);
      double a_lo = 500.0, a_hi = 5000.0, b_lo = -1.2, b_hi = -0.5;
      if (rd.contains("a_range")) {
        a_lo = rd.at("a_range").at(0).get<double>();
        a_hi = rd.at("a_range").at(1).get<double>();
      }
      if (rd.contains("b_range")) {
        b_lo = rd.at("b_range").at(0).get<double>();
        b_hi = rd.at("b_range").at(1).get<double>();
      }
      for (size_t v = 0; v < n_vp; ++v)
        sc.viewpoint_models.push_back(synthetic_rd_model(
            rd_seed + v, sc.tiling.tiles_x, sc.tiling.tiles_y, a_lo, a_hi, b_lo, b_hi));
    } else if (source == "file") {
      const std::string rel = get_required<std::string>(rd, "/rd", "path");
      const RdKind kind =
          get<std::string>(rd, "/rd", "kind", "power") == "power" ? RdKind::power
                                                                  : RdKind::exponential;
      const auto samples = load_rd_samples_csv((base_dir / rel).string());
      for (size_t v = 0; v < n_vp; ++v)
        sc.viewpoint_models.push_back(
            fit_rd(samples, kind, sc.tiling.tiles_x, sc.tiling.tiles_y));
    } else {
      throw data_error("/rd/source: expected 'synthetic' or 'file'");
    }
    for (const RdModel& m : sc.viewpoint_models)
      sc.viewpoint_tables.push_back(build_layer_table(m, layers, r_min, r_max));
  }

  // Device: render speed given in pixels/s, data sizes derived from the
  // panorama and viewport geometry (8-bit 4:2:0, 1.5 bytes per pixel).
  {
    const auto& d = j.at("device");
    require_keys(d, "/device",
                 {"decode_mbps", "render_pixels_per_s", "viewport_width", "viewport_height"});
    sc.device.decode_mbps = get_required<double>(d, "/device", "decode_mbps");
    const double pix_s = get_required<double>(d, "/device", "render_pixels_per_s");
    const int vw = get<int>(d, "/device", "viewport_width", 2048);
    const int vh = get<int>(d, "/device", "viewport_height", 2048);
    const double frames = sc.gop_duration * sc.frame_rate;
    sc.device.render_bytes_per_s = pix_s * 1.5;
    sc.device.viewport_bytes = static_cast<double>(vw) * vh * 1.5 * frames;
    sc.device.raw_tile_bytes = static_cast<double>(sc.tiling.tile_width()) *
                               sc.tiling.tile_height() * 1.5 * frames;
  }
  {
    const auto& b = j.at("budgets");
    require_keys(b, "/budgets",
                 {"edge_decode_mbps", "wifi_total_mbps", "xgen_tx_mbps", "xgen_from_channel"});
    sc.budgets.edge_decode_mbps = get_required<double>(b, "/budgets", "edge_decode_mbps");
    sc.budgets.wifi_total_mbps = get_required<double>(b, "/budgets", "wifi_total_mbps");
    sc.cx_from_channel = get<bool>(b, "/budgets", "xgen_from_channel", false);
    const auto& xj = b.at("xgen_tx_mbps");
    if (xj.is_number()) {
      sc.budgets.xgen_tx_mbps.assign(sc.arena.transmitters.size(), xj.get<double>());
    } else if (xj.is_array()) {
      for (const auto& v : xj) sc.budgets.xgen_tx_mbps.push_back(v.get<double>());
    } else {
      throw data_error("/budgets/xgen_tx_mbps: expected number or array");
    }
  }
  sc.device.edge_decode_mbps = sc.budgets.edge_decode_mbps;

  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    require_keys(c, "/channel",
                 {"vlc_tx_power_w", "vlc_half_angle_deg", "vlc_responsivity", "vlc_pd_area_m2",
                  "vlc_noise_psd", "vlc_bandwidth_mhz", "vlc_diffuse_gain", "mm_eirp_dbm",
                  "mm_rx_gain_db", "mm_pl0_db", "mm_d0_m", "mm_path_loss_exp", "mm_noise_dbm",
                  "mm_sidelobe_db", "mm_bandwidth_mhz", "rx_height_m", "rx_fov_deg",
                  "beam_cone_deg", "capacity_cap_mbps", "slew_deg_per_s"});
    ChannelParams& p = sc.channel;
    p.vlc_tx_power_w = get<double>(c, "/channel", "vlc_tx_power_w", p.vlc_tx_power_w);
    p.vlc_half_angle_deg = get<double>(c, "/channel", "vlc_half_angle_deg", p.vlc_half_angle_deg);
    p.vlc_responsivity = get<double>(c, "/channel", "vlc_responsivity", p.vlc_responsivity);
    p.vlc_pd_area_m2 = get<double>(c, "/channel", "vlc_pd_area_m2", p.vlc_pd_area_m2);
    p.vlc_noise_psd = get<double>(c, "/channel", "vlc_noise_psd", p.vlc_noise_psd);
    p.vlc_bandwidth_mhz = get<double>(c, "/channel", "vlc_bandwidth_mhz", p.vlc_bandwidth_mhz);
    p.vlc_diffuse_gain = get<double>(c, "/channel", "vlc_diffuse_gain", p.vlc_diffuse_gain);
    p.mm_eirp_dbm = get<double>(c, "/channel", "mm_eirp_dbm", p.mm_eirp_dbm);
    p.mm_rx_gain_db = get<double>(c, "/channel", "mm_rx_gain_db", p.mm_rx_gain_db);
    p.mm_pl0_db = get<double>(c, "/channel", "mm_pl0_db", p.mm_pl0_db);
    p.mm_d0_m = get<double>(c, "/channel", "mm_d0_m", p.mm_d0_m);
    p.mm_path_loss_exp = get<double>(c, "/channel", "mm_path_loss_exp", p.mm_path_loss_exp);
    p.mm_noise_dbm = get<double>(c, "/channel", "mm_noise_dbm", p.mm_noise_dbm);
    p.mm_sidelobe_db = get<double>(c, "/channel", "mm_sidelobe_db", p.mm_sidelobe_db);
    p.mm_bandwidth_mhz = get<double>(c, "/channel", "mm_bandwidth_mhz", p.mm_bandwidth_mhz);
    p.rx_height_m = get<double>(c, "/channel", "rx_height_m", p.rx_height_m);
    p.rx_fov_deg = get<double>(c, "/channel", "rx_fov_deg", p.rx_fov_deg);
    p.beam_cone_deg = get<double>(c, "/channel", "beam_cone_deg", p.beam_cone_deg);
    p.capacity_cap_mbps = get<double>(c, "/channel", "capacity_cap_mbps", p.capacity_cap_mbps);
    p.slew_deg_per_s = get<double>(c, "/channel", "slew_deg_per_s", p.slew_deg_per_s);
  }

  if (j.contains("dropout")) {
    const auto& d = j.at("dropout");
    require_keys(d, "/dropout", {"kind", "p_drop", "yaw_rate_threshold_deg_s", "gops"});
    const std::string kind = get<std::string>(d, "/dropout", "kind", "none");
    if (kind == "none")
      sc.dropout.kind = DropoutModel::Kind::none;
    else if (kind == "bernoulli")
      sc.dropout.kind = DropoutModel::Kind::bernoulli;
    else if (kind == "rotation_threshold")
      sc.dropout.kind = DropoutModel::Kind::rotation_threshold;
    else if (kind == "scheduled")
      sc.dropout.kind = DropoutModel::Kind::scheduled;
    else
      throw data_error("/dropout/kind: unknown kind '" + kind + "'");
    sc.dropout.p_drop = get<double>(d, "/dropout", "p_drop", 0.0);
    sc.dropout.yaw_rate_threshold_deg_s =
        get<double>(d, "/dropout", "yaw_rate_threshold_deg_s", 90.0);
    if (d.contains("gops")) {
      for (const auto& v : d.at("gops")) sc.dropout.scheduled_gops.push_back(v.get<int>());
      std::sort(sc.dropout.scheduled_gops.begin(), sc.dropout.scheduled_gops.end());
    }
  }

  if (j.contains("assignment")) {
    const auto& a = j.at("assignment");
    require_keys(a, "/assignment", {"period_gops", "hysteresis", "objective"});
    sc.reassign_period_gops = get<int>(a, "/assignment", "period_gops", 1);
    sc.reassign_hysteresis = get<double>(a, "/assignment", "hysteresis", 0.0);
    const std::string obj = get<std::string>(a, "/assignment", "objective", "distance");
    if (obj == "distance")
      sc.assignment_objective = AssignmentObjective::distance;
    else if (obj == "max_min_snr")
      sc.assignment_objective = AssignmentObjective::max_min_snr;
    else
      throw data_error("/assignment/objective: unknown objective '" + obj + "'");
  }
  if (j.contains("prediction")) {
    const auto& p = j.at("prediction");
    require_keys(p, "/prediction", {"lag_gops"});
    sc.prediction_lag_gops = get<int>(p, "/prediction", "lag_gops", 1);
  }
  if (j.contains("scoring")) {
    const auto& s = j.at("scoring");
    require_keys(s, "/scoring", {"no_content_floor_mse", "use_ws_weights"});
    sc.floor_mse = get<double>(s, "/scoring", "no_content_floor_mse", sc.floor_mse);
    sc.use_ws_weights = get<bool>(s, "/scoring", "use_ws_weights", true);
  }

  sc.validate();
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open scenario '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("scenario '" + path + "': " + e.what());
  }
  return load_scenario_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace arena360
