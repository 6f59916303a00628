#pragma once

#include "mkt/trading_post.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace mkt::detail {

inline std::vector<Index> demanded_goods(const Vector& values) {
  std::vector<Index> g;
  for (Index j = 0; j < values.size(); ++j) {
    if (values(j) > 0.0) g.push_back(j);
  }
  return g;
}

inline bool better(double candidate, double incumbent) {
  return candidate > incumbent + 1e-15 * std::max(1.0, std::abs(incumbent));
}

// With an entrance fee the feasible bids are a union of boxes, one per set S
// of goods carrying an effective bid. `solve(S)` maximizes over one box;
// every affordable S is tried when there are at most `exhaustive_limit`
// demanded goods, otherwise add/drop local search from the largest
// affordable S.
template <class Solve>
std::optional<BRResult> best_over_supports(const std::vector<Index>& demanded, double budget,
                                           double delta, Solve&& solve, int exhaustive_limit) {
  const auto g = static_cast<int>(demanded.size());
  std::optional<BRResult> best;
  auto consider = [&](const std::vector<Index>& support) {
    if (support.empty() || delta * static_cast<double>(support.size()) > budget) return false;
    std::optional<BRResult> r = solve(support);
    if (r && (!best || better(r->utility, best->utility))) {
      best = std::move(r);
      return true;
    }
    return false;
  };

  if (g <= exhaustive_limit) {
    std::vector<Index> support;
    for (std::uint32_t mask = 1; mask < (1u << g); ++mask) {
      support.clear();
      for (int k = 0; k < g; ++k) {
        if (mask & (1u << k)) support.push_back(demanded[static_cast<std::size_t>(k)]);
      }
      consider(support);
    }
    return best;
  }

  std::vector<bool> in(static_cast<std::size_t>(g), false);
  const auto affordable = static_cast<int>(std::min<double>(g, std::floor(budget / delta)));
  for (int k = 0; k < affordable; ++k) in[static_cast<std::size_t>(k)] = true;
  auto as_support = [&](const std::vector<bool>& flags) {
    std::vector<Index> s;
    for (int k = 0; k < g; ++k) {
      if (flags[static_cast<std::size_t>(k)]) s.push_back(demanded[static_cast<std::size_t>(k)]);
    }
    return s;
  };
  consider(as_support(in));
  for (bool improved = true; improved;) {
    improved = false;
    for (int k = 0; k < g && !improved; ++k) {
      std::vector<bool> flip = in;
      flip[static_cast<std::size_t>(k)] = !flip[static_cast<std::size_t>(k)];
      if (consider(as_support(flip))) {
        in = flip;
        improved = true;
      }
    }
  }
  return best;
}

}  // namespace mkt::detail
