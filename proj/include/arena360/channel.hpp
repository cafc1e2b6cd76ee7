#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "arena360/core.hpp"
#include "arena360/navigation.hpp"

namespace arena360 {

enum class TxTech { vlc, mmwave };
enum class Steering { electronic_switch, mechanical, hybrid, beamform };

struct Transmitter {
  int id = 0;
  double x = 0.0, y = 0.0, z = 3.0;  // meters, ceiling mount
  TxTech tech = TxTech::vlc;
  Steering steering = Steering::mechanical;
};

struct Arena {
  double width = 6.0;   // x extent, meters
  double depth = 4.0;   // y extent
  double ceiling_height = 3.0;
  int cells_x = 3;
  int cells_y = 2;
  std::vector<Transmitter> transmitters;
  std::vector<std::array<double, 2>> viewpoints;

  int cell_count() const { return cells_x * cells_y; }

  void validate() const {
    if (!(width > 0.0) || !(depth > 0.0) || !(ceiling_height > 0.0))
      throw std::invalid_argument("arena: nonpositive dimensions");
    if (cells_x <= 0 || cells_y <= 0) throw std::invalid_argument("arena: nonpositive cells");
    if (transmitters.empty()) throw std::invalid_argument("arena: no transmitters");
  }

  // Boundaries belong to the lower-index cell.
  int cell_of(double x, double y) const {
    const double cw = width / cells_x;
    const double ch = depth / cells_y;
    const int ix = std::clamp(x <= 0.0 ? 0 : static_cast<int>(std::ceil(x / cw)) - 1, 0,
                              cells_x - 1);
    const int iy = std::clamp(y <= 0.0 ? 0 : static_cast<int>(std::ceil(y / ch)) - 1, 0,
                              cells_y - 1);
    return iy * cells_x + ix;
  }

  std::array<double, 2> cell_center(int c) const {
    const double cw = width / cells_x;
    const double ch = depth / cells_y;
    return {(c % cells_x + 0.5) * cw, (c / cells_x + 0.5) * ch};
  }
};

// All link constants live here; the scenario file owns every value.
struct ChannelParams {
  // VLC (Lambertian line of sight, square-law detection)
  double vlc_tx_power_w = 2.0;
  double vlc_half_angle_deg = 30.0;   // transmitter semi-angle at half power
  double vlc_responsivity = 0.54;     // A/W
  double vlc_pd_area_m2 = 1e-4;
  double vlc_noise_psd = 1e-21;       // A^2/Hz
  double vlc_bandwidth_mhz = 400.0;
  double vlc_diffuse_gain = 0.05;     // interferer gain scale

  // mmWave (log-distance path loss)
  double mm_eirp_dbm = 40.0;
  double mm_rx_gain_db = 10.0;
  double mm_pl0_db = 68.0;            // at d0
  double mm_d0_m = 1.0;
  double mm_path_loss_exp = 2.0;
  double mm_noise_dbm = -84.0;
  double mm_sidelobe_db = 20.0;       // interferer attenuation
  double mm_bandwidth_mhz = 800.0;

  double rx_height_m = 1.5;
  double rx_fov_deg = 85.0;           // VLC photodiode field of view (from zenith)
  double beam_cone_deg = 90.0;        // mmWave coverage cone half-angle
  double capacity_cap_mbps = 4000.0;  // device ceiling
  double slew_deg_per_s = 360.0;      // mechanical steering speed
};

struct LinkState {
  double snr_db = -std::numeric_limits<double>::infinity();
  double sinr_db = -std::numeric_limits<double>::infinity();
  double capacity_mbps = 0.0;
  bool aligned = false;
  bool dropped = false;
};

// A transmitter together with the point its beam is steered at.
struct AimedTx {
  const Transmitter* tx = nullptr;
  double aim_x = 0.0, aim_y = 0.0;  // floor coordinates of its served user
};

namespace detail {

struct UserPoint {
  double x, y, z;
};

inline double distance(const Transmitter& tx, const UserPoint& u) {
  const double dx = tx.x - u.x, dy = tx.y - u.y, dz = tx.z - u.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Cosine of the angle between the transmitter boresight (toward its aim
// point at receiver height) and the direction to the receiver.
inline double cos_irradiance(const Transmitter& tx, const AimedTx& aim, const UserPoint& rx,
                             double rx_height) {
  double bx = aim.aim_x - tx.x, by = aim.aim_y - tx.y, bz = rx_height - tx.z;
  const double bn = std::sqrt(bx * bx + by * by + bz * bz);
  if (bn <= 0.0) return 1.0;
  double ux = rx.x - tx.x, uy = rx.y - tx.y, uz = rx.z - tx.z;
  const double un = std::sqrt(ux * ux + uy * uy + uz * uz);
  if (un <= 0.0) return 1.0;
  return std::clamp((bx * ux + by * uy + bz * uz) / (bn * un), -1.0, 1.0);
}

// Receiver normal points straight up.
inline double cos_incidence(const Transmitter& tx, const UserPoint& rx) {
  const double d = distance(tx, rx);
  if (d <= 0.0) return 1.0;
  return std::clamp((tx.z - rx.z) / d, -1.0, 1.0);
}

inline double vlc_electrical_power(const Transmitter& tx, const AimedTx& aim,
                                   const UserPoint& rx, const ChannelParams& p,
                                   bool interferer) {
  const double d = distance(tx, rx);
  const double half = deg2rad(p.vlc_half_angle_deg);
  const double lambert_m = -std::log(2.0) / std::log(std::cos(half));
  const double ci = cos_irradiance(tx, aim, rx, p.rx_height_m);
  const double cpsi = cos_incidence(tx, rx);
  if (ci <= 0.0 || cpsi <= 0.0) return 0.0;
  if (std::acos(cpsi) > deg2rad(p.rx_fov_deg)) return 0.0;
  double h = (lambert_m + 1.0) * p.vlc_pd_area_m2 / (2.0 * kPi * d * d) *
             std::pow(ci, lambert_m) * cpsi;
  if (interferer) h *= p.vlc_diffuse_gain;
  const double i_rx = p.vlc_responsivity * p.vlc_tx_power_w * h;
  return i_rx * i_rx;
}

inline double mm_rx_power_mw(const Transmitter& tx, const UserPoint& rx,
                             const ChannelParams& p, bool interferer) {
  const double d = std::max(distance(tx, rx), p.mm_d0_m);
  const double pl = p.mm_pl0_db + 10.0 * p.mm_path_loss_exp * std::log10(d / p.mm_d0_m);
  double rx_dbm = p.mm_eirp_dbm + p.mm_rx_gain_db - pl;
  if (interferer) rx_dbm -= p.mm_sidelobe_db;
  return std::pow(10.0, rx_dbm / 10.0);
}

}  // namespace detail

// SNR/SINR and Shannon capacity of one xGen link. Interferers are the
// other active transmitters, steered at their own users; their power
// reaches this receiver through diffuse (VLC) or sidelobe (mmWave) gain.
inline LinkState xgen_link(const AimedTx& serving, double user_x, double user_y,
                           const std::vector<AimedTx>& interferers, const ChannelParams& p) {
  const detail::UserPoint rx{user_x, user_y, p.rx_height_m};
  LinkState ls;

  double signal = 0.0, noise = 1.0, interference = 0.0, bandwidth_mhz = 0.0;
  if (serving.tx->tech == TxTech::vlc) {
    signal = detail::vlc_electrical_power(*serving.tx, serving, rx, p, false);
    noise = p.vlc_noise_psd * p.vlc_bandwidth_mhz * 1e6;
    bandwidth_mhz = p.vlc_bandwidth_mhz;
    for (const AimedTx& it : interferers)
      if (it.tx->id != serving.tx->id && it.tx->tech == TxTech::vlc)
        interference += detail::vlc_electrical_power(*it.tx, it, rx, p, true);
  } else {
    signal = detail::mm_rx_power_mw(*serving.tx, rx, p, false);
    noise = std::pow(10.0, p.mm_noise_dbm / 10.0);
    bandwidth_mhz = p.mm_bandwidth_mhz;
    for (const AimedTx& it : interferers)
      if (it.tx->id != serving.tx->id && it.tx->tech == TxTech::mmwave)
        interference += detail::mm_rx_power_mw(*it.tx, rx, p, true);
  }

  if (signal <= 0.0) {
    ls.aligned = false;
    return ls;
  }
  ls.aligned = true;
  const double snr = signal / noise;
  const double sinr = signal / (noise + interference);
  ls.snr_db = 10.0 * std::log10(snr);
  ls.sinr_db = 10.0 * std::log10(sinr);
  ls.capacity_mbps = std::min(bandwidth_mhz * std::log2(1.0 + sinr), p.capacity_cap_mbps);
  return ls;
}

// Traditional sub-6 GHz link: a shared pool split evenly, never dropped.
inline LinkState wifi_link(double total_capacity_mbps, int n_users) {
  if (n_users <= 0) throw std::invalid_argument("wifi_link: need at least one user");
  LinkState ls;
  ls.aligned = true;
  ls.dropped = false;
  ls.capacity_mbps = total_capacity_mbps / n_users;
  ls.snr_db = ls.sinr_db = std::numeric_limits<double>::infinity();
  return ls;
}

// Beam aim points per transmitter from the previous GOP, for mechanical
// slew accounting.
struct SteerState {
  std::vector<std::array<double, 2>> aim_of_tx;  // indexed by transmitter id
  bool initialized = false;
};

// Per-user alignment flags for the GOP. Mechanical steering realigns
// unless the required slew exceeds the servo capability over the GOP;
// electronic switching serves only its own cell; beamforming covers its
// cone; hybrid steers mechanically until the user shares a cell.
inline std::vector<bool> steer(const Arena& arena, const std::vector<int>& tx_of_user,
                               const std::vector<std::array<double, 2>>& user_xy,
                               const ChannelParams& p, double gop_duration,
                               SteerState& state) {
  arena.validate();
  const int nu = static_cast<int>(user_xy.size());
  std::vector<bool> aligned(nu, false);

  std::vector<int> cell_of_user(nu);
  std::vector<int> users_in_cell(arena.cell_count(), 0);
  for (int u = 0; u < nu; ++u) {
    cell_of_user[u] = arena.cell_of(user_xy[u][0], user_xy[u][1]);
    ++users_in_cell[cell_of_user[u]];
  }

  if (state.aim_of_tx.size() != arena.transmitters.size())
    state.aim_of_tx.assign(arena.transmitters.size(), {0.0, 0.0});

  const double max_slew = p.slew_deg_per_s * gop_duration;
  std::vector<std::array<double, 2>> new_aim = state.aim_of_tx;

  for (int u = 0; u < nu; ++u) {
    const int ti = tx_of_user[u];
    const Transmitter& tx = arena.transmitters[ti];
    const double ux = user_xy[u][0], uy = user_xy[u][1];

    auto mechanical_ok = [&]() {
      if (!state.initialized) return true;
      const auto& prev = state.aim_of_tx[ti];
      const detail::UserPoint a{prev[0], prev[1], p.rx_height_m};
      const detail::UserPoint b{ux, uy, p.rx_height_m};
      const double va[3] = {a.x - tx.x, a.y - tx.y, a.z - tx.z};
      const double vb[3] = {b.x - tx.x, b.y - tx.y, b.z - tx.z};
      const double na = std::sqrt(va[0] * va[0] + va[1] * va[1] + va[2] * va[2]);
      const double nb = std::sqrt(vb[0] * vb[0] + vb[1] * vb[1] + vb[2] * vb[2]);
      if (na <= 0.0 || nb <= 0.0) return true;
      const double c =
          std::clamp((va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]) / (na * nb), -1.0, 1.0);
      return rad2deg(std::acos(c)) <= max_slew + 1e-12;
    };
    auto electronic_ok = [&]() {
      return cell_of_user[u] == arena.cell_of(tx.x, tx.y);
    };
    auto beamform_ok = [&]() {
      const double dz = tx.z - p.rx_height_m;
      const double dr = std::hypot(ux - tx.x, uy - tx.y);
      return rad2deg(std::atan2(dr, std::max(dz, 1e-9))) <= p.beam_cone_deg;
    };

    bool ok = false;
    switch (tx.steering) {
      case Steering::mechanical:
        ok = mechanical_ok();
        break;
      case Steering::electronic_switch:
        ok = electronic_ok();
        break;
      case Steering::beamform:
        ok = beamform_ok();
        break;
      case Steering::hybrid:
        ok = users_in_cell[cell_of_user[u]] > 1 ? electronic_ok() : mechanical_ok();
        break;
    }
    aligned[u] = ok;
    new_aim[ti] = {ux, uy};
  }

  state.aim_of_tx = new_aim;
  state.initialized = true;
  return aligned;
}

struct DropoutModel {
  enum class Kind { none, bernoulli, rotation_threshold, scheduled };
  Kind kind = Kind::none;
  double p_drop = 0.0;                    // per GOP
  double yaw_rate_threshold_deg_s = 90.0;
  std::vector<int> scheduled_gops;        // sorted GOP indices

  void validate() const {
    if (p_drop < 0.0 || p_drop > 1.0)
      throw std::invalid_argument("dropout: p_drop must lie in [0,1]");
  }
};

// Maximum yaw rate over consecutive trace samples inside the interval.
inline double max_yaw_rate(const NavigationTrace& trace, const GopInterval& iv) {
  double peak = 0.0;
  for (size_t i = 1; i < trace.samples.size(); ++i) {
    const TraceSample& a = trace.samples[i - 1];
    const TraceSample& b = trace.samples[i];
    if (b.t <= iv.t_start || a.t >= iv.t_end()) continue;
    const double dyaw = std::abs(wrap_deg(b.pose.yaw - a.pose.yaw));
    peak = std::max(peak, dyaw / (b.t - a.t));
  }
  return peak;
}

inline bool sample_dropout(const DropoutModel& model, const NavigationTrace& trace,
                           const GopInterval& iv, int gop_index, std::mt19937_64& rng) {
  model.validate();
  switch (model.kind) {
    case DropoutModel::Kind::none:
      return false;
    case DropoutModel::Kind::bernoulli:
      return uniform01(rng) < model.p_drop;
    case DropoutModel::Kind::rotation_threshold:
      return max_yaw_rate(trace, iv) > model.yaw_rate_threshold_deg_s;
    case DropoutModel::Kind::scheduled:
      return std::binary_search(model.scheduled_gops.begin(), model.scheduled_gops.end(),
                                gop_index);
  }
  return false;
}

}  // namespace arena360
