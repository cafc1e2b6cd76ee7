#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "arena360/core.hpp"

namespace arena360 {

enum class RdKind { power, exponential };

struct RdSample {
  int n = 0, m = 0;
  double rate_mbps = 0.0;
  double mse = 0.0;
};

// Fitted parameters for one tile. Power law: D = a * R^b (b < 0).
// Exponential: D = c * exp(-d * R) (d > 0).
struct RdTileParams {
  double a = 0.0, b = 0.0;
  double c = 0.0, d = 0.0;
  double fit_rms_rel = 0.0;
};

struct RdModel {
  RdKind kind = RdKind::power;
  TileGrid<RdTileParams> tiles;

  double eval(int n, int m, double rate_mbps) const {
    if (!(rate_mbps > 0.0)) throw std::invalid_argument("rd eval: rate must be positive");
    const RdTileParams& t = tiles.at(n, m);
    if (kind == RdKind::power) return t.a * std::pow(rate_mbps, t.b);
    return t.c * std::exp(-t.d * rate_mbps);
  }

  // |dD/dR| at the given rate; used as the raw-tile sorting criterion.
  double abs_slope(int n, int m, double rate_mbps) const {
    const RdTileParams& t = tiles.at(n, m);
    if (kind == RdKind::power) return t.a * std::abs(t.b) * std::pow(rate_mbps, t.b - 1.0);
    return t.c * t.d * std::exp(-t.d * rate_mbps);
  }
};

// Log-domain least squares per tile. Power law regresses log D on log R,
// exponential regresses log D on R. Requires >= 2 samples with distinct
// rates per tile; reports the RMS relative error of the fit per tile.
inline RdModel fit_rd(const std::vector<RdSample>& samples, RdKind kind, int tiles_x,
                      int tiles_y) {
  RdModel model;
  model.kind = kind;
  model.tiles = TileGrid<RdTileParams>(tiles_x, tiles_y);

  TileGrid<std::vector<const RdSample*>> per_tile(tiles_x, tiles_y);
  for (const RdSample& s : samples) {
    if (!(s.rate_mbps > 0.0) || !(s.mse > 0.0))
      throw data_error("rd fit: rates and distortions must be positive");
    per_tile.at(s.n, s.m).push_back(&s);
  }

  for (int m = 0; m < tiles_y; ++m) {
    for (int n = 0; n < tiles_x; ++n) {
      const auto& pts = per_tile.at(n, m);
      if (pts.size() < 2)
        throw data_error("rd fit: tile (" + std::to_string(n) + "," + std::to_string(m) +
                         ") needs at least 2 samples");
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const RdSample* s : pts) {
        const double x = kind == RdKind::power ? std::log(s->rate_mbps) : s->rate_mbps;
        const double y = std::log(s->mse);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double k = static_cast<double>(pts.size());
      const double det = k * sxx - sx * sx;
      if (std::abs(det) < 1e-12 * k * std::max(1.0, sxx))
        throw data_error("rd fit: singular design (all rates equal) at tile (" +
                         std::to_string(n) + "," + std::to_string(m) + ")");
      const double slope = (k * sxy - sx * sy) / det;
      const double intercept = (sy - slope * sx) / k;

      RdTileParams& tp = model.tiles.at(n, m);
      if (kind == RdKind::power) {
        tp.a = std::exp(intercept);
        tp.b = slope;
      } else {
        tp.c = std::exp(intercept);
        tp.d = -slope;
      }
      double acc = 0.0;
      for (const RdSample* s : pts) {
        const double fitted = kind == RdKind::power ? tp.a * std::pow(s->rate_mbps, tp.b)
                                                    : tp.c * std::exp(-tp.d * s->rate_mbps);
        const double rel = (fitted - s->mse) / s->mse;
        acc += rel * rel;
      }
      tp.fit_rms_rel = std::sqrt(acc / k);
    }
  }
  return model;
}

// Cumulative (rate, distortion) points of one tile's embedded layers.
struct TileLayers {
  std::vector<double> rate_mbps;  // strictly increasing, layer 1..L
  std::vector<double> mse;        // strictly decreasing
};

struct ScalableTileTable {
  TileGrid<TileLayers> tiles;
  int layers = 0;

  double r_min(int n, int m) const { return tiles.at(n, m).rate_mbps.front(); }
  double r_max(int n, int m) const { return tiles.at(n, m).rate_mbps.back(); }

  void validate() const {
    if (layers < 2) throw std::invalid_argument("layer table: need at least 2 layers");
    for (const TileLayers& t : tiles) {
      if (static_cast<int>(t.rate_mbps.size()) != layers ||
          static_cast<int>(t.mse.size()) != layers)
        throw std::invalid_argument("layer table: ragged tile");
      for (int l = 1; l < layers; ++l) {
        if (!(t.rate_mbps[l] > t.rate_mbps[l - 1]))
          throw std::invalid_argument("layer table: rates not strictly increasing");
        if (!(t.mse[l] < t.mse[l - 1]))
          throw std::invalid_argument("layer table: distortions not strictly decreasing");
      }
    }
  }

  // Largest layer rate <= rate (plus epsilon); never below layer 1.
  double snap_down(int n, int m, double rate) const {
    const auto& rs = tiles.at(n, m).rate_mbps;
    double best = rs.front();
    for (double r : rs)
      if (r <= rate + 1e-9) best = r;
    return best;
  }
};

// Geometric rate spacing from r_min to r_max; distortions from the model.
inline ScalableTileTable build_layer_table(const RdModel& model, int layers, double r_min,
                                           double r_max) {
  if (layers < 2) throw std::invalid_argument("layer table: L must be >= 2");
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw std::invalid_argument("layer table: need 0 < r_min < r_max");
  ScalableTileTable table;
  table.layers = layers;
  table.tiles = TileGrid<TileLayers>(model.tiles.nx(), model.tiles.ny());
  const double ratio = std::pow(r_max / r_min, 1.0 / (layers - 1));
  for (int m = 0; m < model.tiles.ny(); ++m) {
    for (int n = 0; n < model.tiles.nx(); ++n) {
      TileLayers& t = table.tiles.at(n, m);
      t.rate_mbps.resize(layers);
      t.mse.resize(layers);
      for (int l = 0; l < layers; ++l) {
        t.rate_mbps[l] = l == layers - 1 ? r_max : r_min * std::pow(ratio, l);
        t.mse[l] = model.eval(n, m, t.rate_mbps[l]);
      }
    }
  }
  table.validate();
  return table;
}

// Single PSNR conversion used everywhere downstream (8-bit luminance).
inline double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) throw std::invalid_argument("psnr: mse must be positive");
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Seeded synthetic content: per-tile power-law parameters spanning static
// to dynamic tiles.
inline RdModel synthetic_rd_model(std::uint64_t seed, int tiles_x, int tiles_y,
                                  double a_lo = 500.0, double a_hi = 5000.0,
                                  double b_lo = -1.2, double b_hi = -0.5) {
  std::mt19937_64 rng(seed);
  RdModel model;
  model.kind = RdKind::power;
  model.tiles = TileGrid<RdTileParams>(tiles_x, tiles_y);
  for (auto& t : model.tiles) {
    t.a = a_lo + (a_hi - a_lo) * uniform01(rng);
    t.b = b_lo + (b_hi - b_lo) * uniform01(rng);
  }
  return model;
}

}  // namespace arena360
