#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "arena360/core.hpp"

namespace arena360 {

// Bipartite user -> transmitter problem. w[u][t] is a distance (or any
// cost to be bottleneck-minimized); transmitters >= users.
struct AssignmentProblem {
  std::vector<std::vector<double>> w;

  int users() const { return static_cast<int>(w.size()); }
  int transmitters() const { return w.empty() ? 0 : static_cast<int>(w.front().size()); }

  void validate() const {
    if (w.empty()) throw std::invalid_argument("assignment: no users");
    const size_t cols = w.front().size();
    for (const auto& row : w) {
      if (row.size() != cols) throw std::invalid_argument("assignment: ragged weight matrix");
      for (double x : row)
        if (!std::isfinite(x)) throw std::invalid_argument("assignment: non-finite weight");
    }
    if (static_cast<int>(cols) < users())
      throw std::invalid_argument("assignment: need transmitters >= users");
  }
};

struct Assignment {
  std::vector<int> tx_of_user;
  double bottleneck = 0.0;
  int feasibility_tests = 0;  // matching runs during the threshold search
};

namespace detail {

// Kuhn's augmenting-path matching restricted to edges with w <= thr.
// fixed[u] >= 0 pins user u to that transmitter.
inline bool perfect_matching_under(const AssignmentProblem& p, double thr,
                                   const std::vector<int>& fixed) {
  const int nu = p.users();
  const int nt = p.transmitters();
  std::vector<int> user_of_tx(nt, -1);
  std::vector<char> visited(nt, 0);

  auto try_user = [&](auto&& self, int u) -> bool {
    for (int t = 0; t < nt; ++t) {
      if (visited[t]) continue;
      if (fixed[u] >= 0 ? t != fixed[u] : p.w[u][t] > thr) continue;
      visited[t] = 1;
      if (user_of_tx[t] < 0 || self(self, user_of_tx[t])) {
        user_of_tx[t] = u;
        return true;
      }
    }
    return false;
  };

  for (int u = 0; u < nu; ++u) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!try_user(try_user, u)) return false;
  }
  return true;
}

}  // namespace detail

// Perfect (user-side) matching minimizing the largest selected weight.
// Binary search over the sorted distinct weights with a matching
// feasibility test per probe; ties among optimal matchings are broken by
// the lexicographically smallest assignment vector.
inline Assignment bottleneck_match(const AssignmentProblem& p) {
  p.validate();
  const int nu = p.users();
  const int nt = p.transmitters();

  std::vector<double> weights;
  weights.reserve(static_cast<size_t>(nu) * nt);
  for (const auto& row : p.w) weights.insert(weights.end(), row.begin(), row.end());
  std::sort(weights.begin(), weights.end());
  weights.erase(std::unique(weights.begin(), weights.end()), weights.end());

  const std::vector<int> unfixed(nu, -1);
  Assignment out;

  // The full graph is complete, so the largest weight is always feasible.
  int lo = 0, hi = static_cast<int>(weights.size()) - 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    ++out.feasibility_tests;
    if (detail::perfect_matching_under(p, weights[mid], unfixed))
      hi = mid;
    else
      lo = mid + 1;
  }
  const double thr = weights[lo];
  out.bottleneck = thr;

  // Lexicographically smallest matching using only edges <= thr.
  std::vector<int> fixed(nu, -1);
  std::vector<char> taken(nt, 0);
  for (int u = 0; u < nu; ++u) {
    bool placed = false;
    for (int t = 0; t < nt && !placed; ++t) {
      if (taken[t] || p.w[u][t] > thr) continue;
      fixed[u] = t;
      if (detail::perfect_matching_under(p, thr, fixed)) {
        taken[t] = 1;
        placed = true;
      } else {
        fixed[u] = -1;
      }
    }
    if (!placed) throw std::logic_error("bottleneck_match: lexicographic construction failed");
  }
  out.tx_of_user = fixed;
  return out;
}

// Max-min SNR assignment: bottleneck matching on negated SNR weights.
// Returns the minimum selected SNR as the bottleneck.
inline Assignment max_min_snr_assign(const AssignmentProblem& snr_problem) {
  AssignmentProblem neg = snr_problem;
  for (auto& row : neg.w)
    for (double& x : row) x = -x;
  Assignment a = bottleneck_match(neg);
  a.bottleneck = -a.bottleneck;
  return a;
}

// Periodic reassignment with hysteresis: outside reassignment GOPs the
// previous matching is kept; on reassignment the previous matching is
// retained while its current bottleneck stays within epsilon of the new
// optimum.
class ReassignmentPolicy {
 public:
  ReassignmentPolicy(int period_gops = 1, double hysteresis = 0.0)
      : period_(period_gops < 1 ? 1 : period_gops), eps_(hysteresis) {}

  Assignment step(const AssignmentProblem& p) {
    const int gop = gop_counter_++;
    if (current_ && gop % period_ != 0) return evaluated(p, *current_);

    Assignment fresh = bottleneck_match(p);
    if (current_) {
      const Assignment prev = evaluated(p, *current_);
      if (prev.bottleneck <= fresh.bottleneck + eps_) return prev;
    }
    current_ = fresh.tx_of_user;
    return fresh;
  }

  void reset() {
    current_.reset();
    gop_counter_ = 0;
  }

 private:
  static Assignment evaluated(const AssignmentProblem& p, const std::vector<int>& pi) {
    Assignment a;
    a.tx_of_user = pi;
    a.bottleneck = -std::numeric_limits<double>::infinity();
    for (int u = 0; u < p.users(); ++u)
      a.bottleneck = std::max(a.bottleneck, p.w[u][pi[u]]);
    return a;
  }

  int period_;
  double eps_;
  std::optional<std::vector<int>> current_;
  int gop_counter_ = 0;
};

}  // namespace arena360
