#pragma once

// Batch aggregation: fatality-scenario probability with its normal-approximation
// half-width, F-N exceedance points, RSET samples and FED distribution.
//
// F-N frequencies are per-simulation proportions, not annual rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "aevac/engine.hpp"
#include "aevac/error.hpp"
#include "aevac/fireenv.hpp"

namespace aevac {

struct RiskEstimate {
  double p_hat = 0.0;
  double ci_half_width = 0.0;
};

/// Share of runs with at least one Dead agent, +- 1.96 standard errors.
inline RiskEstimate risk_probability(std::span<const SimulationOutcome> outcomes) {
  if (outcomes.empty()) throw InputError("empty batch");
  std::size_t fatal = 0;
  for (const auto& o : outcomes) fatal += o.fatalities >= 1;
  const double n = static_cast<double>(outcomes.size());
  const double p = static_cast<double>(fatal) / n;
  return {p, 1.96 * std::sqrt(p * (1.0 - p) / n)};
}

struct FnPoint {
  std::size_t fatalities = 0;  // N
  double frequency = 0.0;      // share of runs with at least N deaths

  bool operator==(const FnPoint&) const = default;
};

/// One point per distinct observed fatality count N >= 1, ascending in N.
inline std::vector<FnPoint> fn_curve(std::span<const SimulationOutcome> outcomes) {
  if (outcomes.empty()) throw InputError("empty batch");
  std::vector<std::size_t> counts;
  for (const auto& o : outcomes) {
    if (o.fatalities >= 1) counts.push_back(o.fatalities);
  }
  std::sort(counts.begin(), counts.end());
  const double n = static_cast<double>(outcomes.size());
  std::vector<FnPoint> out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i > 0 && counts[i] == counts[i - 1]) continue;
    out.push_back({counts[i], static_cast<double>(counts.size() - i) / n});
  }
  return out;
}

struct FedHistogram {
  std::vector<double> edges;        // bin i is [edges[i], edges[i+1])
  std::vector<std::size_t> counts;  // one per bin

  bool operator==(const FedHistogram&) const = default;
};

/// Bins at the health-effect thresholds, the last one open-ended.
inline std::vector<double> default_fed_edges() {
  return {0.0, 0.01, 0.3, 1.0, std::numeric_limits<double>::infinity()};
}

inline FedHistogram fed_histogram(std::span<const SimulationOutcome> outcomes,
                                  std::vector<double> edges = default_fed_edges()) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw InputError("histogram edges must be strictly increasing");
  }
  FedHistogram h{edges, std::vector<std::size_t>(edges.size() - 1, 0)};
  for (const auto& o : outcomes) {
    for (const auto& a : o.agents) {
      const auto it = std::upper_bound(edges.begin(), edges.end(), a.fed_total);
      if (it == edges.begin() || it == edges.end()) continue;  // outside the binned range
      ++h.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
  }
  return h;
}

struct BatchSummary {
  std::size_t n = 0;
  double p_hat = 0.0;
  double ci_half_width = 0.0;
  std::vector<FnPoint> fn_points;
  std::vector<double> rset_samples;  // ascending; runs where nobody escaped contribute none
  FedHistogram fed_histogram;
  std::array<std::size_t, 4> health{};  // Minor, Low, Heavy, Lethal
  std::size_t agents = 0;
  std::size_t fatalities = 0;
  std::size_t unresolved = 0;  // agents still Waiting or Moving at the horizon

  bool operator==(const BatchSummary&) const = default;
};

inline BatchSummary summarize(std::span<const SimulationOutcome> outcomes) {
  BatchSummary s;
  const RiskEstimate r = risk_probability(outcomes);
  s.n = outcomes.size();
  s.p_hat = r.p_hat;
  s.ci_half_width = r.ci_half_width;
  s.fn_points = fn_curve(outcomes);
  s.fed_histogram = fed_histogram(outcomes);
  for (const auto& o : outcomes) {
    if (o.rset) s.rset_samples.push_back(*o.rset);
    s.fatalities += o.fatalities;
    for (const auto& a : o.agents) {
      ++s.agents;
      ++s.health[static_cast<std::size_t>(health_effect(a.fed_total))];
      s.unresolved += a.unresolved;
    }
  }
  std::sort(s.rset_samples.begin(), s.rset_samples.end());
  return s;
}

inline nlohmann::ordered_json summary_json(const BatchSummary& s) {
  using nlohmann::ordered_json;
  ordered_json fn = ordered_json::array();
  for (const auto& p : s.fn_points) fn.push_back({{"N", p.fatalities}, {"frequency", p.frequency}});
  ordered_json edges = ordered_json::array();
  for (double e : s.fed_histogram.edges) {
    if (std::isinf(e)) {
      edges.push_back(nullptr);  // open upper edge
    } else {
      edges.push_back(e);
    }
  }
  double mean = 0.0;
  for (double x : s.rset_samples) mean += x;
  if (!s.rset_samples.empty()) mean /= static_cast<double>(s.rset_samples.size());
  return {{"n", s.n},
          {"p_hat", s.p_hat},
          {"ci_half_width", s.ci_half_width},
          {"agents", s.agents},
          {"fatalities", s.fatalities},
          {"unresolved", s.unresolved},
          {"health", {{"Minor", s.health[0]}, {"Low", s.health[1]}, {"Heavy", s.health[2]}, {"Lethal", s.health[3]}}},
          {"fed_histogram", {{"edges", edges}, {"counts", s.fed_histogram.counts}}},
          {"rset", {{"count", s.rset_samples.size()},
                    {"mean", s.rset_samples.empty() ? ordered_json(nullptr) : ordered_json(mean)},
                    {"max", s.rset_samples.empty() ? ordered_json(nullptr) : ordered_json(s.rset_samples.back())}}},
          {"fn", fn}};
}

/// fatalities_N,exceedance_frequency
inline void write_fn_csv(std::ostream& os, const BatchSummary& s) {
  os << "fatalities_N,exceedance_frequency\n";
  for (const auto& p : s.fn_points) os << p.fatalities << ',' << nlohmann::json(p.frequency).dump() << '\n';
}

/// rank,rset_s,cumulative_fraction  (empirical CDF over runs with an RSET)
inline void write_rset_csv(std::ostream& os, const BatchSummary& s) {
  os << "rank,rset_s,cumulative_fraction\n";
  const double k = static_cast<double>(s.rset_samples.size());
  for (std::size_t i = 0; i < s.rset_samples.size(); ++i) {
    os << i + 1 << ',' << nlohmann::json(s.rset_samples[i]).dump() << ','
       << nlohmann::json(static_cast<double>(i + 1) / k).dump() << '\n';
  }
}

}  // namespace aevac
