#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "kyleback/errors.hpp"
#include "kyleback/grid.hpp"
#include "kyleback/io.hpp"
#include "kyleback/rng.hpp"
#include "kyleback/stats.hpp"
#include "kyleback/terminal_law.hpp"
#include "scenarios.hpp"

using namespace kyleback;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  using W = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRngTest, DrawsArePureFunctionsOfTheCounter) {
  const CounterRng a(42, streams::shocks), b(42, streams::shocks), other(42, streams::prior);
  for (std::uint64_t p = 0; p < 5; ++p)
    for (std::uint32_t s = 0; s < 5; ++s) {
      EXPECT_EQ(a.normal_pair(p, s), b.normal_pair(p, s));
      EXPECT_NE(a.normal_pair(p, s), other.normal_pair(p, s));
    }
  // reading out of order does not change values
  const auto late = a.uniform_pair(9, 9);
  (void)a.uniform_pair(0, 0);
  EXPECT_EQ(a.uniform_pair(9, 9), late);
}

TEST(CounterRngTest, UniformsOpenIntervalAndNormalMoments) {
  const CounterRng rng(7, streams::shocks);
  double sum = 0.0, sq = 0.0, cross = 0.0;
  const std::size_t n = 200000;
  for (std::uint64_t p = 0; p < n; ++p) {
    const auto [u1, u2] = rng.uniform_pair(p, 3);
    ASSERT_GT(u1, 0.0);
    ASSERT_LT(u1, 1.0);
    ASSERT_GT(u2, 0.0);
    ASSERT_LT(u2, 1.0);
    const auto [z1, z2] = rng.normal_pair(p, 0);
    sum += z1 + z2;
    sq += z1 * z1 + z2 * z2;
    cross += z1 * z2;
  }
  const double m = sum / (2.0 * n), v = sq / (2.0 * n), c = cross / n;
  // tolerances are about 5 standard errors
  EXPECT_NEAR(m, 0.0, 5.0 / std::sqrt(2.0 * n));
  EXPECT_NEAR(v, 1.0, 5.0 * std::sqrt(2.0 / (2.0 * n)));
  EXPECT_NEAR(c, 0.0, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(DeriveSeed, DistinctPerStageAndIndex) {
  std::set<std::uint64_t> seen;
  for (const char* stage : {"simulate", "bridge", "filter", "equilibrium"})
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(1234, stage, i));
  EXPECT_EQ(seen.size(), 200u);
  EXPECT_EQ(derive_seed(1234, "bridge", 3), derive_seed(1234, "bridge", 3));
  EXPECT_NE(derive_seed(1234, "bridge"), derive_seed(1235, "bridge"));
}

TEST(TerminalLawTest, GaussianQuantileInvertsCdf) {
  const TerminalLaw law = TerminalLaw::gaussian(0.5, 4.0);
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999})
    EXPECT_NEAR(law.cdf(law.quantile(p)), p, 1e-12 + 1e-9 * p) << p;
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(law.pdf(0.5), 1.0 / std::sqrt(2.0 * M_PI * 4.0), 1e-15);
}

TEST(TerminalLawTest, MixtureMomentsAndExpectation) {
  const TerminalLaw law = TerminalLaw::mixture({{0.25, -1.0, 0.5}, {0.75, 2.0, 1.5}});
  const double mean = 0.25 * -1.0 + 0.75 * 2.0;
  const double second = 0.25 * (0.5 + 1.0) + 0.75 * (1.5 + 4.0);
  EXPECT_NEAR(law.mean(), mean, 1e-14);
  EXPECT_NEAR(law.variance(), second - mean * mean, 1e-13);
  EXPECT_NEAR(law.expectation([](double y) { return y * y; }), second, 1e-8);
  EXPECT_NEAR(law.cdf(law.quantile(0.4)), 0.4, 1e-10);
}

TEST(TerminalLawTest, PointMassAndEmpirical) {
  const TerminalLaw pm = TerminalLaw::point_mass(1.5);
  EXPECT_EQ(pm.cdf(1.4), 0.0);
  EXPECT_EQ(pm.cdf(1.5), 1.0);
  EXPECT_EQ(pm.mean(), 1.5);
  EXPECT_THROW((void)pm.pdf(1.5), Error);
  const TerminalLaw emp = TerminalLaw::empirical({3.0, 1.0, 2.0, 4.0});
  EXPECT_EQ(emp.samples().front(), 1.0);
  EXPECT_DOUBLE_EQ(emp.mean(), 2.5);
  EXPECT_DOUBLE_EQ(emp.cdf(2.0), 0.5);
}

TEST(Stats, MeanEstimateKnownData) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const MeanEstimate m = mean_estimate(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.std_dev, std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(m.se, std::sqrt(5.0 / 3.0) / 2.0);
  EXPECT_EQ(m.n, 4u);
  const MeanEstimate d = paired_difference(xs, std::vector<double>{1.0, 1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(d.mean, 1.5);
  EXPECT_DOUBLE_EQ(joint_se(3.0, 4.0), 5.0);
}

TEST(Stats, KsOfExactQuantilesIsAtMostOneOverN) {
  const TerminalLaw law = TerminalLaw::gaussian(0.0, 1.0);
  for (std::size_t n : {10u, 100u, 1000u}) {
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(law.quantile((i + 0.5) / static_cast<double>(n)));
    EXPECT_NEAR(ks_statistic(xs, law), 0.5 / static_cast<double>(n), 1e-12) << n;
  }
  EXPECT_EQ(ks_two_sample({1.0, 2.0, 3.0}, {3.0, 1.0, 2.0}), 0.0);
  EXPECT_DOUBLE_EQ(ks_two_sample({0.0, 0.1}, {5.0, 6.0}), 1.0);
}

TEST(Stats, WassersteinShiftProperty) {
  // W1 between a law and its exact quantile sample shifted by c tends to |c|
  const TerminalLaw law = TerminalLaw::gaussian(0.0, 1.0);
  for (double c : {-0.3, 0.2, 1.0}) {
    std::vector<double> xs;
    for (std::size_t i = 0; i < 4000; ++i) xs.push_back(law.quantile((i + 0.5) / 4000.0) + c);
    EXPECT_NEAR(wasserstein1(xs, law), std::abs(c), 2e-3) << c;
  }
}

TEST(Stats, QuantileAndSlope) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4.0, 1.0, 3.0, 2.0}, 1.0), 4.0);
  const std::vector<double> xs{0.0, 1.0, 2.0, 3.0}, ys{1.0, 3.0, 5.0, 7.0};
  const SlopeEstimate s = regression_slope(xs, ys);
  EXPECT_NEAR(s.slope, 2.0, 1e-14);
  EXPECT_NEAR(s.se, 0.0, 1e-12);
}

TEST(Grid, AxisWithStepAndLocate) {
  const Axis a = Axis::with_step(-1.0, 1.0, 0.25);
  EXPECT_EQ(a.n, 9u);
  EXPECT_DOUBLE_EQ(a.at(8), 1.0);
  const auto [i, w] = a.locate(0.1);
  EXPECT_EQ(i, 4u);
  EXPECT_NEAR(w, 0.4, 1e-12);
  EXPECT_EQ(a.locate(-5.0).first, 0u);
  EXPECT_EQ(a.locate(5.0).first, 7u);
  EXPECT_THROW(Axis::with_step(1.0, 1.0, 0.1), Error);
  EXPECT_THROW((Axis{0.0, 0.0, 1}.validate("x")), Error);
  EXPECT_THROW(TimeGrid::bridge(1.0, 1.5, 10), Error);
}

TEST(Grid, BilinearInterpolationIsExactOnBilinearData) {
  for (std::uint64_t n = 0; n < 20; ++n) {
    kyleback::testing::Gen gen(3, n);
    const double a = gen.normal(), b = gen.normal(), c = gen.normal(), d = gen.normal();
    FieldTX f(Axis{0.0, 1.0, 11}, Axis{-2.0, 2.0, 17});
    for (std::size_t k = 0; k < 11; ++k)
      for (std::size_t i = 0; i < 17; ++i) {
        const double t = f.t_axis().at(k), x = f.x_axis().at(i);
        f.at(k, i) = a + b * t + c * x + d * t * x;
      }
    const double t = gen.uniform(0.0, 1.0), x = gen.uniform(-2.0, 2.0);
    EXPECT_NEAR(f(t, x), a + b * t + c * x + d * t * x, 1e-12) << "case " << n;
  }
}

TEST(Grid, DerivativesExactOnQuadraticsInside) {
  FieldTX f(Axis{0.0, 1.0, 3}, Axis{-1.0, 1.0, 41});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 41; ++i) {
      const double x = f.x_axis().at(i);
      f.at(k, i) = 3.0 * x * x - x + 2.0;
    }
  const FieldTX fx = f.d_dx(), fxx = f.d_dxx();
  for (std::size_t i = 1; i + 1 < 41; ++i) {
    const double x = f.x_axis().at(i);
    EXPECT_NEAR(fx.at(1, i), 6.0 * x - 1.0, 1e-11);
    EXPECT_NEAR(fxx.at(1, i), 6.0, 1e-9);
  }
}

TEST(Io, Fnv1aKnownAnswersAndHex) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Io, FormatDoubleRoundTrips) {
  for (std::uint64_t n = 0; n < 200; ++n) {
    kyleback::testing::Gen gen(5, n);
    const double x = gen.normal() * std::pow(10.0, gen.uniform(-30.0, 30.0));
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Io, AtomicWriteAndCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "kyleback_io_test";
  std::filesystem::remove_all(dir);
  CsvTable t({"a", "b"});
  t.add_row({1.0, 0.5});
  EXPECT_THROW(t.add_row({1.0}), Error);
  const std::string text = t.to_string("config_hash=00ff");
  EXPECT_EQ(text, "# config_hash=00ff\na,b\n1,0.5\n");
  write_atomic(dir / "sub" / "t.csv", text);
  EXPECT_EQ(read_file(dir / "sub" / "t.csv"), text);
  EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "t.csv.tmp"));
  EXPECT_THROW((void)read_file(dir / "missing.csv"), Error);
}
