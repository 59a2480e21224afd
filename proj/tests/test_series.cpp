#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "tsfract/rng.hpp"
#include "tsfract/series.hpp"

using namespace tsfract;

TEST_CASE("time series rejects empty and non-finite input") {
  CHECK_THROWS_AS(TimeSeries(std::vector<double>{}), InvalidInput);
  CHECK_THROWS_AS(TimeSeries({1.0, std::nan(""), 2.0}), InvalidInput);
  CHECK_THROWS_AS(TimeSeries({std::numeric_limits<double>::infinity()}),
                  InvalidInput);
}

TEST_CASE("profile of hand-checked series") {
  const ProfileSeries constant = profile(TimeSeries({1.0, 1.0, 1.0}));
  CHECK(constant.values == std::vector<double>{0.0, 0.0, 0.0});

  const ProfileSeries ramp = profile(TimeSeries({1.0, 2.0, 3.0}));
  CHECK(ramp.values[0] == doctest::Approx(-1.0));
  CHECK(ramp.values[1] == doctest::Approx(-1.0));
  CHECK(ramp.values[2] == doctest::Approx(0.0));

  const ProfileSeries single = profile(TimeSeries({5.0}));
  CHECK(single.values == std::vector<double>{0.0});
}

TEST_CASE("profile is shift invariant and telescopes to zero") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> values(200);
    double max_abs = 0.0;
    for (double& v : values) {
      v = rng.next_gaussian() * 3.0;
      max_abs = std::max(max_abs, std::abs(v));
    }
    const ProfileSeries base = profile(TimeSeries(values));

    const double shift = rng.next_gaussian() * 10.0;
    std::vector<double> shifted = values;
    for (double& v : shifted) v += shift;
    const ProfileSeries moved = profile(TimeSeries(shifted));

    double scale = 0.0;
    for (double v : base.values) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < base.values.size(); ++i)
      CHECK(std::abs(base.values[i] - moved.values[i]) <=
            1e-9 * std::max(scale, 1.0));

    CHECK(std::abs(base.values.back()) <=
          1e-9 * static_cast<double>(values.size()) * max_abs);
  }
}

TEST_CASE("window_count floor arithmetic") {
  CHECK(window_count(100, 30) == 3);
  CHECK(window_count(100, 25) == 4);
  CHECK(window_count(64, 16) == 4);
  CHECK_THROWS_AS(window_count(100, 1), InvalidWindowSize);
  CHECK_THROWS_AS(window_count(10, 11), InvalidWindowSize);
}

TEST_CASE("bidirectional segmentation tiles both ends") {
  ProfileSeries prof;
  prof.values.assign(10, 0.0);
  const WindowGrid grid = segment_bidirectional(prof, 3);
  CHECK(grid.per_direction == 3);
  REQUIRE(grid.windows.size() == 6);

  std::set<std::size_t> fwd_starts, bwd_starts;
  for (std::size_t i = 0; i < 3; ++i) fwd_starts.insert(grid.windows[i].begin);
  for (std::size_t i = 3; i < 6; ++i) bwd_starts.insert(grid.windows[i].begin);
  CHECK(fwd_starts == std::set<std::size_t>{0, 3, 6});
  CHECK(bwd_starts == std::set<std::size_t>{1, 4, 7});
  for (const IndexRange& w : grid.windows) CHECK(w.size() == 3);
}

TEST_CASE("segmentation when the window divides the length exactly") {
  ProfileSeries prof;
  prof.values.assign(9, 0.0);
  const WindowGrid grid = segment_bidirectional(prof, 3);
  REQUIRE(grid.windows.size() == 6);
  std::set<std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < 3; ++i) fwd.insert(grid.windows[i].begin);
  for (std::size_t i = 3; i < 6; ++i) bwd.insert(grid.windows[i].begin);
  CHECK(fwd == bwd);

  prof.values.assign(4, 0.0);
  CHECK(segment_bidirectional(prof, 2).windows.size() == 4);
}

TEST_CASE("segmentation coverage per direction") {
  for (std::size_t l : {17UL, 32UL, 101UL}) {
    for (std::size_t s : {2UL, 5UL, 16UL}) {
      if (s > l) continue;
      ProfileSeries prof;
      prof.values.assign(l, 0.0);
      const WindowGrid grid = segment_bidirectional(prof, s);
      const std::size_t w = grid.per_direction;
      std::size_t fwd_cover = 0, bwd_cover = 0;
      for (std::size_t i = 0; i < w; ++i) fwd_cover += grid.windows[i].size();
      for (std::size_t i = w; i < 2 * w; ++i) bwd_cover += grid.windows[i].size();
      CHECK(fwd_cover == s * (l / s));
      CHECK(bwd_cover == s * (l / s));
      CHECK(grid.windows[0].begin == 0);
      CHECK(grid.windows[2 * w - 1].begin == l - s * w);
      CHECK(grid.windows[w].end == l);
    }
  }
  ProfileSeries prof;
  prof.values.assign(10, 0.0);
  CHECK_THROWS_AS(segment_bidirectional(prof, 11), InvalidWindowSize);
  CHECK_THROWS_AS(segment_bidirectional(prof, 1), InvalidWindowSize);
}

TEST_CASE("local trend reproduces exact polynomials") {
  std::vector<double> line(16);
  for (std::size_t i = 0; i < line.size(); ++i)
    line[i] = 2.0 * static_cast<double>(i + 1) + 1.0;
  const LocalTrend linear = local_trend(line, 1);
  for (std::size_t i = 0; i < line.size(); ++i)
    CHECK(std::abs(line[i] - linear.fitted[i]) < 1e-9);
  CHECK(linear.coefficients[0] == doctest::Approx(2.0));
  CHECK(linear.coefficients[1] == doctest::Approx(1.0));

  std::vector<double> parabola(20);
  for (std::size_t i = 0; i < parabola.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    parabola[i] = k * k;
  }
  const LocalTrend quad = local_trend(parabola, 2);
  for (std::size_t i = 0; i < parabola.size(); ++i)
    CHECK(std::abs(parabola[i] - quad.fitted[i]) < 1e-8);
}

TEST_CASE("local trend residuals are orthogonal to the basis") {
  Rng rng(3);
  std::vector<double> window(32);
  double scale = 0.0;
  for (double& v : window) {
    v = rng.next_gaussian() * 5.0;
    scale = std::max(scale, std::abs(v));
  }
  const LocalTrend trend = local_trend(window, 2);
  for (int power = 0; power <= 2; ++power) {
    double inner = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
      const double k = static_cast<double>(i + 1);
      inner += (window[i] - trend.fitted[i]) * std::pow(k, power);
    }
    // basis columns grow like s^power; normalize before comparing
    const double column_norm = std::pow(static_cast<double>(window.size()),
                                        static_cast<double>(power));
    CHECK(std::abs(inner) / column_norm <
          1e-6 * static_cast<double>(window.size()) * scale);
  }
}

TEST_CASE("local trend interpolates when order is s - 1") {
  Rng rng(4);
  std::vector<double> window(6);
  double scale = 0.0;
  for (double& v : window) {
    v = rng.next_gaussian();
    scale = std::max(scale, std::abs(v));
  }
  const LocalTrend trend = local_trend(window, 5);
  for (std::size_t i = 0; i < window.size(); ++i)
    CHECK(std::abs(window[i] - trend.fitted[i]) <= 1e-6 * std::max(scale, 1.0));
}

TEST_CASE("local trend rejects underdetermined fits") {
  const std::vector<double> tiny{1.0, 2.0};
  CHECK_THROWS_AS(local_trend(tiny, 2), UnderdeterminedFit);
  CHECK_THROWS_AS(local_trend(tiny, 0), InvalidInput);
}
