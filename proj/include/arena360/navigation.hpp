#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "arena360/geometry.hpp"

namespace arena360 {

struct TraceSample {
  double t = 0.0;  // seconds
  HeadPose pose;
  double x = 0.0;  // meters
  double y = 0.0;
};

struct NavigationTrace {
  std::vector<TraceSample> samples;
  std::string user_id;

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("trace: empty");
    for (size_t i = 1; i < samples.size(); ++i)
      if (!(samples[i].t > samples[i - 1].t))
        throw std::invalid_argument("trace: timestamps not strictly increasing");
  }

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }

  // Zero-order hold: the sample at or before t.
  const TraceSample& at(double t) const {
    if (samples.empty() || t < samples.front().t - 1e-12)
      throw std::out_of_range("trace underflow");
    size_t lo = 0, hi = samples.size();
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (samples[mid].t <= t + 1e-12)
        lo = mid;
      else
        hi = mid;
    }
    return samples[lo];
  }
};

struct GopInterval {
  double t_start = 0.0;
  double duration = 1.0;   // GOP duration, seconds
  double frame_rate = 30;  // fps

  double t_end() const { return t_start + duration; }

  int frame_count() const {
    if (!(duration > 0.0) || !(frame_rate > 0.0))
      throw std::invalid_argument("gop: nonpositive duration or frame rate");
    const double f = duration * frame_rate;
    const double r = std::round(f);
    if (r < 1.0 || std::abs(f - r) > 1e-6)
      throw std::invalid_argument("gop: duration * frame_rate must be a positive integer");
    return static_cast<int>(r);
  }

  double frame_time(int k) const { return t_start + k / frame_rate; }
};

// Per-GOP tile navigation likelihoods; sums to 1.
struct NavigationProfile {
  TileGrid<double> p;
  GopInterval interval;

  double sum() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }
};

namespace detail {

inline bool same_pose(const HeadPose& a, const HeadPose& b) {
  return a.yaw == b.yaw && a.pitch == b.pitch && a.roll == b.roll;
}

}  // namespace detail

// Frame-average of the normalized viewport footprint over the GOP. Poses
// are held between trace samples (zero-order hold at display instants).
inline NavigationProfile profile_for_interval(const NavigationTrace& trace,
                                              const GopInterval& iv,
                                              const TilingConfig& cfg) {
  trace.validate();
  const int frames = iv.frame_count();
  if (iv.t_start < trace.t_begin() - 1e-9 || iv.t_end() > trace.t_end() + 1e-9)
    throw std::out_of_range("trace underflow");

  NavigationProfile prof;
  prof.interval = iv;
  prof.p = TileGrid<double>(cfg.tiles_x, cfg.tiles_y, 0.0);

  HeadPose prev_pose;
  TileGrid<double> s;
  bool have_prev = false;
  for (int k = 0; k < frames; ++k) {
    const HeadPose pose = trace.at(iv.frame_time(k)).pose;
    if (!have_prev || !detail::same_pose(pose, prev_pose)) {
      s = normalize_footprint(rasterize_viewport(pose, cfg));
      prev_pose = pose;
      have_prev = true;
    }
    for (size_t i = 0; i < s.size(); ++i) prof.p[i] += s[i];
  }
  for (auto& v : prof.p) v /= frames;
  return prof;
}

// Persistence prediction: the pose observed at knowledge_t held constant
// over the interval.
inline NavigationProfile predict_profile_at(const NavigationTrace& trace, double knowledge_t,
                                            const GopInterval& iv, const TilingConfig& cfg) {
  trace.validate();
  const HeadPose pose = trace.at(knowledge_t).pose;
  NavigationProfile prof;
  prof.interval = iv;
  prof.p = normalize_footprint(rasterize_viewport(pose, cfg));
  return prof;
}

inline NavigationProfile predict_profile(const NavigationTrace& trace, const GopInterval& iv,
                                         const TilingConfig& cfg) {
  return predict_profile_at(trace, iv.t_start, iv, cfg);
}

// Total variation between two profiles; 0 iff they coincide.
inline double mismatch_mass(const NavigationProfile& a, const NavigationProfile& b) {
  if (!a.p.same_shape(b.p)) throw std::invalid_argument("mismatch_mass: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.p.size(); ++i) acc += std::abs(a.p[i] - b.p[i]);
  return 0.5 * acc;
}

// Index of the Euclidean-nearest spatial viewpoint at time t; ties go to
// the lowest index.
inline int active_viewpoint(const NavigationTrace& trace, double t,
                            const std::vector<std::array<double, 2>>& viewpoints) {
  if (viewpoints.empty()) throw std::invalid_argument("active_viewpoint: no viewpoints");
  const TraceSample& s = trace.at(t);
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < viewpoints.size(); ++i) {
    const double dx = s.x - viewpoints[i][0];
    const double dy = s.y - viewpoints[i][1];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace arena360
