#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace arena360 {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wrap an angle to [-180, 180).
inline double wrap_deg(double deg) {
  double w = std::fmod(deg + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  return w - 180.0;
}

// Error raised when a requested allocation cannot satisfy its constraints.
class infeasible_error : public std::runtime_error {
 public:
  explicit infeasible_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Error raised on malformed input data (CSV/JSON).
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense per-tile table indexed (n, m): n = column (longitude, left to
// right), m = row (latitude, top to bottom).
template <typename T>
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(int nx, int ny, T init = T{})
      : nx_(nx), ny_(ny), v_(static_cast<size_t>(nx) * ny, init) {
    if (nx <= 0 || ny <= 0) throw std::invalid_argument("TileGrid: nonpositive dims");
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  size_t size() const { return v_.size(); }

  T& at(int n, int m) { return v_[index(n, m)]; }
  const T& at(int n, int m) const { return v_[index(n, m)]; }

  T& operator[](size_t i) { return v_[i]; }
  const T& operator[](size_t i) const { return v_[i]; }

  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  bool same_shape(const TileGrid& o) const { return nx_ == o.nx_ && ny_ == o.ny_; }

 private:
  size_t index(int n, int m) const {
    if (n < 0 || n >= nx_ || m < 0 || m >= ny_)
      throw std::out_of_range("TileGrid: tile (" + std::to_string(n) + "," +
                              std::to_string(m) + ") out of range");
    return static_cast<size_t>(m) * nx_ + n;
  }

  int nx_ = 0, ny_ = 0;
  std::vector<T> v_;
};

// Portable uniform double in [0, 1) from a 64-bit generator draw. Keeps
// seeded outputs identical across standard library implementations.
template <typename Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace arena360
