#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aevac/fireenv.hpp"
#include "test_support.hpp"

namespace aevac {
namespace {

const char* kHeader =
    "t_s,comp,h_layer_m,T_up_C,T_low_C,OD_up,OD_low,CO_up_ppm,CO_low_ppm,HCN_up_ppm,HCN_low_ppm,"
    "HCl_up_ppm,HCl_low_ppm,CO2_up_pct,CO2_low_pct,O2_up_pct,O2_low_pct\n";

std::string row(double t, const std::string& comp, double h, double co_up, double co_low, double od_up = 0.0) {
  std::ostringstream os;
  os.precision(17);
  os << t << ',' << comp << ',' << h << ",200,20," << od_up << ",0," << co_up << ',' << co_low
     << ",0,0,0,0,1,0,19,20.9\n";
  return os.str();
}

TEST(IngestHistory, LinearInterpolationAndClamp) {
  const FireHistory h = ingest_history(std::string(kHeader) + row(0, "ROOM0", 3, 0, 0) + row(10, "ROOM0", 3, 0, 1000));
  EXPECT_DOUBLE_EQ(conditions_at(h, "ROOM0", 5.0, 1.8).co, 500.0);
  EXPECT_DOUBLE_EQ(conditions_at(h, "ROOM0", 25.0, 1.8).co, 1000.0);
  EXPECT_DOUBLE_EQ(conditions_at(h, "ROOM0", -1.0, 1.8).co, 0.0);
  EXPECT_DOUBLE_EQ(h.end_time(), 10.0);
}

TEST(IngestHistory, InterleavedCompartments) {
  const FireHistory h = ingest_history(std::string(kHeader) + row(0, "A", 3, 0, 0) + row(0, "B", 3, 0, 50) +
                                       row(10, "A", 3, 0, 100) + row(10, "B", 3, 0, 50));
  EXPECT_DOUBLE_EQ(conditions_at(h, "A", 2.5, 1.8).co, 25.0);
  EXPECT_DOUBLE_EQ(conditions_at(h, "B", 2.5, 1.8).co, 50.0);
  EXPECT_EQ(h.compartments(), (std::vector<std::string>{"A", "B"}));
}

TEST(IngestHistory, RandomHistoriesMatchTwoPointFormula) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> value(0.0, 5000.0), gap(0.5, 30.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::string csv = kHeader;
    std::vector<double> ts, cos;
    double t = 0.0;
    for (int i = 0; i < 12; ++i) {
      ts.push_back(t);
      cos.push_back(value(rng));
      csv += row(t, "COR0", 0.5, cos.back(), 0.0);
      t += gap(rng);
    }
    const FireHistory h = ingest_history(csv);
    std::uniform_real_distribution<double> when(0.0, ts.back());
    for (int q = 0; q < 20; ++q) {
      const double x = when(rng);
      std::size_t k = 0;
      while (ts[k + 1] < x) ++k;
      const double expected = cos[k] + (cos[k + 1] - cos[k]) * (x - ts[k]) / (ts[k + 1] - ts[k]);
      EXPECT_NEAR(conditions_at(h, "COR0", x, 1.8).co, expected, 1e-12 * std::max(1.0, expected));
    }
  }
}

TEST(IngestHistory, SchemaErrors) {
  EXPECT_THROW(ingest_history(""), InputError);
  EXPECT_THROW(ingest_history("t,comp\n0,A\n"), InputError);
  EXPECT_THROW(ingest_history(std::string(kHeader) + "0,A,3\n"), InputError);
  EXPECT_THROW(ingest_history(std::string(kHeader) + row(0, "A", 3, -1, 0)), InputError);
  EXPECT_THROW(ingest_history(std::string(kHeader) + row(5, "A", 3, 0, 0) + row(5, "A", 3, 0, 0)), InputError);
  EXPECT_THROW(ingest_history(std::string(kHeader) + row(5, "A", 3, 0, 0) + row(1, "A", 3, 0, 0)), InputError);
  std::string bad = std::string(kHeader) + row(0, "A", 3, 0, 0);
  bad.replace(bad.find("200"), 3, "2x0");
  EXPECT_THROW(ingest_history(bad), InputError);
}

TEST(ConditionsAt, BreathingHeightSelectsLayer) {
  auto history = [](double layer) {
    return ingest_history(std::string(kHeader) + row(0, "R", layer, 900, 100, 0.7));
  };
  EXPECT_DOUBLE_EQ(conditions_at(history(2.5), "R", 0, 1.8).co, 100.0);
  EXPECT_DOUBLE_EQ(conditions_at(history(1.0), "R", 0, 1.8).co, 900.0);
  const LocalConditions at_interface = conditions_at(history(1.8), "R", 0, 1.8);
  EXPECT_DOUBLE_EQ(at_interface.co, 900.0);
  EXPECT_NEAR(at_interface.ks, 0.7 * std::log(10.0), 1e-12);
  EXPECT_DOUBLE_EQ(at_interface.o2, 19.0);
  EXPECT_THROW(conditions_at(history(1.0), "NOPE", 0, 1.8), InputError);
}

TEST(Extinction, Constants) {
  EXPECT_EQ(extinction(0.0), 0.0);
  EXPECT_NEAR(extinction(1.0), 2.302585, 1e-6);
  EXPECT_NEAR(extinction(0.5), 1.151293, 1e-6);
  EXPECT_NEAR(extinction(1.0), 1.0 / std::log10(std::exp(1.0)), 1e-12);
  EXPECT_THROW(extinction(-0.1), InputError);
}

TEST(WalkingSpeed, Examples) {
  const SmokeSpeedParams p{0.706, -0.057};
  EXPECT_EQ(walking_speed(1.2, 0.0, p), 1.2);
  EXPECT_NEAR(walking_speed(1.2, 3.0, p), 1.2 * (1.0 - 0.057 / 0.706 * 3.0), 1e-12);
  ASSERT_LT(1.0 - 0.057 / 0.706 * 20.0, 0.1);
  EXPECT_NEAR(walking_speed(1.2, 20.0, p), 0.12, 1e-12);
  EXPECT_THROW(walking_speed(1.2, 1.0, {0.0, -0.05}), InputError);
}

TEST(WalkingSpeed, BoundsProperty) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> v(0.3, 2.0), ks(0.0, 40.0), a(0.4, 1.0), b(-0.1, -0.001);
  for (int i = 0; i < 5000; ++i) {
    const double vp = v(rng), k = ks(rng);
    const double w = walking_speed(vp, k, {a(rng), b(rng)});
    EXPECT_GE(w, 0.1 * vp);
    EXPECT_LE(w, vp);
    if (k > 0.0) {
      EXPECT_LT(w, vp);
    }
  }
}

// Independent transcription of the dose-rate formulas (per second).
struct DoseRates {
  double co, hcn, hcl, o2;
};
DoseRates oracle_rates(const LocalConditions& c) {
  return {2.764e-5 * std::exp(1.036 * std::log(std::max(c.co, 1e-300))) / 60.0 * (c.co > 0.0),
          std::max(0.0, std::exp(c.hcn / 43.0) / 220.0 - 0.0045) / 60.0, c.hcl / 1900.0 / 60.0,
          1.0 / (60.0 * std::exp(8.13 - 0.54 * (20.9 - c.o2)))};
}

TEST(FedIncrement, AmbientOnlyAccumulatesOxygenBaseline) {
  FedState s;
  for (int i = 0; i < 60; ++i) s = fed_increment(s, kAmbient, 1.0);
  EXPECT_EQ(s.co, 0.0);
  EXPECT_EQ(s.hcl, 0.0);
  EXPECT_NEAR(s.o2, 60.0 / (60.0 * std::exp(8.13)), 1e-15);
  // HCN at zero concentration: 1/220 - 0.0045 is positive, so a small baseline remains.
  EXPECT_NEAR(s.hcn, 1.0 / 220.0 - 0.0045, 1e-15);
}

TEST(FedIncrement, ConstantCarbonMonoxide) {
  LocalConditions c = kAmbient;
  c.co = 1000.0;
  FedState s;
  for (int i = 0; i < 60; ++i) s = fed_increment(s, c, 1.0);
  EXPECT_NEAR(s.co, 2.764e-5 * std::pow(1000.0, 1.036), 1e-12);
  const double hv = std::exp(2.0004) / 7.1;
  EXPECT_NEAR(s.total, (s.co + s.hcn + s.hcl) * hv + s.o2, 1e-15);
}

TEST(FedIncrement, HyperventilationScalesAccumulatedSumAtQueryTime) {
  LocalConditions c = kAmbient;
  c.co = 2000.0;
  FedState s = fed_increment({}, c, 30.0);
  c.co2 = 5.0;
  s = fed_increment(s, c, 1.0);
  EXPECT_NEAR(s.total, (s.co + s.hcn + s.hcl) * std::exp(0.1903 * 5.0 + 2.0004) / 7.1 + s.o2, 1e-15);
}

TEST(FedIncrement, PiecewiseConstantMatchesFineQuadrature) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> co(0.0, 8000.0), hcn(0.0, 200.0), hcl(0.0, 500.0), co2(0.0, 8.0),
      o2(10.0, 20.9);
  std::uniform_int_distribution<int> breaks(1, 59);
  for (int trial = 0; trial < 10; ++trial) {
    // Segments with integer-second breakpoints over 60 s.
    std::vector<int> edges{0, 60};
    for (int i = 0; i < 5; ++i) edges.push_back(breaks(rng));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<LocalConditions> seg;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      seg.push_back({0.0, 20.0, co(rng), hcn(rng), hcl(rng), co2(rng), o2(rng)});
    }
    auto at = [&](double t) {
      std::size_t k = 0;
      while (k + 2 < edges.size() && t >= edges[k + 1]) ++k;
      return seg[k];
    };
    FedState s;
    for (int t = 0; t < 60; ++t) s = fed_increment(s, at(t), 1.0);

    double fco = 0, fhcn = 0, fhcl = 0, fo2 = 0;
    for (int ms = 0; ms < 60000; ++ms) {
      const DoseRates r = oracle_rates(at(ms * 1e-3));
      fco += r.co * 1e-3;
      fhcn += r.hcn * 1e-3;
      fhcl += r.hcl * 1e-3;
      fo2 += r.o2 * 1e-3;
    }
    EXPECT_NEAR(s.co, fco, 1e-6 * fco);
    EXPECT_NEAR(s.hcn, fhcn, 1e-6 * fhcn);
    EXPECT_NEAR(s.hcl, fhcl, 1e-6 * fhcl);
    EXPECT_NEAR(s.o2, fo2, 1e-6 * fo2);
  }
}

TEST(FedIncrement, ComponentsNeverDecrease) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FedState s;
  for (int i = 0; i < 2000; ++i) {
    const LocalConditions c{0.0, 20.0, 3000 * u(rng), 150 * u(rng), 300 * u(rng), 6 * u(rng), 20.9 * u(rng)};
    const FedState n = fed_increment(s, c, 0.05 + u(rng));
    ASSERT_GE(n.co, s.co);
    ASSERT_GE(n.hcn, s.hcn);
    ASSERT_GE(n.hcl, s.hcl);
    ASSERT_GE(n.o2, s.o2);
    s = n;
  }
}

TEST(FedIncrement, RectangleRuleConvergesLinearly) {
  auto co_at = [](double t) { return 3000.0 * (1.0 - std::exp(-t / 20.0)); };
  auto integrate = [&](double dt) {
    FedState s;
    for (double t = 0.0; t < 60.0 - 1e-9; t += dt) {
      LocalConditions c = kAmbient;
      c.co = co_at(t);
      s = fed_increment(s, c, dt);
    }
    return s.co;
  };
  const double e1 = integrate(1.0) - integrate(0.5);
  const double e2 = integrate(0.5) - integrate(0.25);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
}

TEST(HealthEffect, TableBoundaries) {
  EXPECT_EQ(health_effect(0.0), HealthEffect::Minor);
  EXPECT_EQ(health_effect(0.005), HealthEffect::Minor);
  EXPECT_EQ(health_effect(std::nextafter(0.01, 0.0)), HealthEffect::Minor);
  EXPECT_EQ(health_effect(0.01), HealthEffect::Low);
  EXPECT_EQ(health_effect(std::nextafter(0.3, 0.0)), HealthEffect::Low);
  EXPECT_EQ(health_effect(0.3), HealthEffect::Heavy);
  EXPECT_EQ(health_effect(std::nextafter(1.0, 0.0)), HealthEffect::Heavy);
  EXPECT_EQ(health_effect(1.0), HealthEffect::Lethal);
  EXPECT_EQ(health_effect(50.0), HealthEffect::Lethal);
}

TEST(HealthEffect, MonotoneStepFunction) {
  int prev = 0;
  for (double f = 0.0; f < 2.0; f += 1e-4) {
    const int cur = static_cast<int>(health_effect(f));
    EXPECT_GE(cur, prev);
    prev = cur;
  }
}

}  // namespace
}  // namespace aevac
