#pragma once

// Two-zone fire history store, breathing-height condition queries, walking
// speed in smoke and fractional effective dose accumulation.
//
// History CSV, one row per (time, compartment), header mandatory:
//   t_s,comp,h_layer_m,T_up_C,T_low_C,OD_up,OD_low,CO_up_ppm,CO_low_ppm,
//   HCN_up_ppm,HCN_low_ppm,HCl_up_ppm,HCl_low_ppm,CO2_up_pct,CO2_low_pct,
//   O2_up_pct,O2_low_pct
// Rows of one compartment must have strictly increasing times; compartments
// may be interleaved.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aevac/error.hpp"

namespace aevac {

struct LayerState {
  double temp = 20.0;  // °C
  double od = 0.0;     // optical density, 1/m
  double co = 0.0;     // ppm
  double hcn = 0.0;    // ppm
  double hcl = 0.0;    // ppm
  double co2 = 0.0;    // %vol
  double o2 = 20.9;    // %vol
};

struct ZoneRecord {
  double time = 0.0;
  double layer_height = 0.0;
  LayerState upper;
  LayerState lower;
};

struct LocalConditions {
  double ks = 0.0;  // extinction coefficient, 1/m
  double temp = 20.0;
  double co = 0.0;
  double hcn = 0.0;
  double hcl = 0.0;
  double co2 = 0.0;
  double o2 = 20.9;
};

inline constexpr LocalConditions kAmbient{};

namespace detail {

inline LayerState lerp(const LayerState& a, const LayerState& b, double w) {
  auto mix = [w](double x, double y) { return x + (y - x) * w; };
  return {mix(a.temp, b.temp), mix(a.od, b.od),   mix(a.co, b.co),  mix(a.hcn, b.hcn),
          mix(a.hcl, b.hcl),   mix(a.co2, b.co2), mix(a.o2, b.o2)};
}

inline constexpr std::array<std::string_view, 17> kHistoryColumns{
    "t_s",        "comp",        "h_layer_m",  "T_up_C",      "T_low_C",    "OD_up",
    "OD_low",     "CO_up_ppm",   "CO_low_ppm", "HCN_up_ppm",  "HCN_low_ppm", "HCl_up_ppm",
    "HCl_low_ppm", "CO2_up_pct", "CO2_low_pct", "O2_up_pct",  "O2_low_pct"};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError("fire history line " + std::to_string(line) + ": bad number in " + std::string(column));
  }
  return v;
}

}  // namespace detail

/// Immutable time/compartment-indexed store with linear interpolation in time.
class FireHistory {
 public:
  FireHistory() = default;

  void add(const std::string& compartment, const ZoneRecord& r) {
    auto& rows = series_[compartment];
    if (!rows.empty() && !(r.time > rows.back().time)) {
      throw InputError("fire history: non-monotonic time for " + compartment);
    }
    rows.push_back(r);
    end_time_ = std::max(end_time_, r.time);
  }

  bool has(const std::string& compartment) const { return series_.count(compartment) != 0; }
  std::vector<std::string> compartments() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : series_) out.push_back(k);
    return out;
  }
  /// Latest sample time over all compartments.
  double end_time() const { return end_time_; }

  /// Both layers at time t, clamped to the first and last samples.
  ZoneRecord record_at(const std::string& compartment, double t) const {
    const auto it = series_.find(compartment);
    if (it == series_.end()) throw InputError("fire history: unknown compartment " + compartment);
    const auto& rows = it->second;
    if (t <= rows.front().time) return rows.front();
    if (t >= rows.back().time) return rows.back();
    const auto hi = std::upper_bound(rows.begin(), rows.end(), t,
                                     [](double x, const ZoneRecord& r) { return x < r.time; });
    const ZoneRecord& b = *hi;
    const ZoneRecord& a = *(hi - 1);
    const double w = (t - a.time) / (b.time - a.time);
    return {t, a.layer_height + (b.layer_height - a.layer_height) * w, detail::lerp(a.upper, b.upper, w),
            detail::lerp(a.lower, b.lower, w)};
  }

 private:
  std::map<std::string, std::vector<ZoneRecord>> series_;
  double end_time_ = 0.0;
};

inline FireHistory ingest_history(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw InputError("fire history: empty file");
  const auto header = detail::split_csv(line);
  if (header.size() != detail::kHistoryColumns.size() ||
      !std::equal(header.begin(), header.end(), detail::kHistoryColumns.begin())) {
    throw InputError("fire history: header does not match the expected columns");
  }
  FireHistory h;
  while (next_line()) {
    const auto f = detail::split_csv(line);
    if (f.size() != detail::kHistoryColumns.size()) {
      throw InputError("fire history line " + std::to_string(line_no) + ": expected 17 fields");
    }
    std::array<double, 17> v{};
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i != 1) v[i] = detail::parse_number(f[i], line_no, detail::kHistoryColumns[i]);
    }
    if (f[1].empty()) throw InputError("fire history line " + std::to_string(line_no) + ": empty compartment");
    ZoneRecord r;
    r.time = v[0];
    r.layer_height = v[2];
    r.upper = {v[3], v[5], v[7], v[9], v[11], v[13], v[15]};
    r.lower = {v[4], v[6], v[8], v[10], v[12], v[14], v[16]};
    const std::string where = "fire history line " + std::to_string(line_no) + ": ";
    if (r.time < 0.0) throw InputError(where + "negative time");
    if (r.layer_height < 0.0) throw InputError(where + "negative layer height");
    for (const LayerState* s : {&r.upper, &r.lower}) {
      if (s->od < 0.0 || s->co < 0.0 || s->hcn < 0.0 || s->hcl < 0.0 || s->co2 < 0.0) {
        throw InputError(where + "negative concentration");
      }
      if (s->o2 < 0.0 || s->o2 > 20.9) throw InputError(where + "O2 outside [0, 20.9]");
    }
    h.add(std::string(f[1]), r);
  }
  return h;
}

inline double extinction(double od) {
  if (od < 0.0) throw InputError("negative optical density");
  return od * std::numbers::ln10;
}

/// Breathing at or above the layer interface reads the upper (smoke) layer.
inline LocalConditions conditions_at(const FireHistory& history, const std::string& compartment, double t,
                                     double breathing_height) {
  const ZoneRecord r = history.record_at(compartment, t);
  const LayerState& s = breathing_height >= r.layer_height ? r.upper : r.lower;
  return {extinction(s.od), s.temp, s.co, s.hcn, s.hcl, s.co2, s.o2};
}

struct SmokeSpeedParams {
  double alpha = 0.706;
  double beta = -0.057;
};

/// Speed in smoke of extinction coefficient ks, never below a tenth of v_pref.
inline double walking_speed(double v_pref, double ks, const SmokeSpeedParams& p) {
  if (p.alpha == 0.0) throw InputError("smoke speed alpha must be non-zero");
  return std::max(0.1 * v_pref, v_pref * (1.0 + p.beta / p.alpha * ks));
}

struct FedState {
  double co = 0.0;
  double hcn = 0.0;
  double hcl = 0.0;
  double o2 = 0.0;
  double total = 0.0;
};

inline double hyperventilation(double co2_pct) { return std::exp(0.1903 * co2_pct + 2.0004) / 7.1; }

/// One rectangle-rule step of dt seconds at conditions c.
inline FedState fed_increment(const FedState& s, const LocalConditions& c, double dt) {
  const double minutes = dt / 60.0;
  FedState n = s;
  n.co += 2.764e-5 * std::pow(c.co, 1.036) * minutes;
  n.hcn += std::max(0.0, std::exp(c.hcn / 43.0) / 220.0 - 0.0045) * minutes;
  n.hcl += c.hcl / 1900.0 * minutes;
  n.o2 += dt / (60.0 * std::exp(8.13 - 0.54 * (20.9 - c.o2)));
  n.total = (n.co + n.hcn + n.hcl) * hyperventilation(c.co2) + n.o2;
  return n;
}

enum class HealthEffect { Minor, Low, Heavy, Lethal };

inline HealthEffect health_effect(double fed_total) {
  if (fed_total < 0.01) return HealthEffect::Minor;
  if (fed_total < 0.3) return HealthEffect::Low;
  if (fed_total < 1.0) return HealthEffect::Heavy;
  return HealthEffect::Lethal;
}

inline const char* to_string(HealthEffect h) {
  switch (h) {
    case HealthEffect::Minor: return "Minor";
    case HealthEffect::Low: return "Low";
    case HealthEffect::Heavy: return "Heavy";
    case HealthEffect::Lethal: return "Lethal";
  }
  return "?";
}

}  // namespace aevac
