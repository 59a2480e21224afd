#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsfract/mfdfa.hpp"
#include "tsfract/rng.hpp"
#include "tsfract/synth.hpp"

using namespace tsfract;

namespace {

double l2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("standard detrending is the plain difference") {
  const std::vector<double> window{1.0, 2.0, 3.0};
  LocalTrend zero_trend;
  zero_trend.fitted = {0.0, 0.0, 0.0};
  CHECK(detrend_standard(window, zero_trend) == window);

  LocalTrend exact;
  exact.fitted = window;
  for (double d : detrend_standard(window, exact)) CHECK(d == 0.0);

  LocalTrend mismatched;
  mismatched.fitted = {0.0};
  CHECK_THROWS_AS(detrend_standard(window, mismatched), InvalidInput);
}

TEST_CASE("least-squares residuals sum to zero") {
  const std::vector<double> window{1.0, 0.0, 1.0};
  const LocalTrend trend = local_trend(window, 1);
  const std::vector<double> residuals = detrend_standard(window, trend);
  double sum = 0.0;
  for (double r : residuals) sum += r;
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("sigmoid projection and its inverse") {
  CHECK(sigmoid_project(0.4, 0.0) == doctest::Approx(0.5));
  CHECK(sigmoid_project(0.4, 1.0) == doctest::Approx(0.598688).epsilon(1e-5));
  CHECK(sigmoid_unproject(0.4, 0.5) == doctest::Approx(0.0));
  CHECK(sigmoid_unproject(0.4, 0.598688) == doctest::Approx(1.0).epsilon(1e-4));

  // full 1e-10 round-trips hold while sigma(alpha*x) keeps enough bits; the
  // projection saturates to 1.0 in binary64 beyond alpha*x ~ 36.7
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const double x = rng.next_symmetric(16.0 / 0.4);
    CHECK(sigmoid_project(0.4, x) + sigmoid_project(0.4, -x) ==
          doctest::Approx(1.0).epsilon(1e-12));
    const double back = sigmoid_unproject(0.4, sigmoid_project(0.4, x));
    CHECK(std::abs(back - x) <= 1e-10 * std::max(1.0, std::abs(x)));
  }
  for (int rep = 0; rep < 200; ++rep) {
    const double x = rng.next_symmetric(30.0 / 0.4);
    const double back = sigmoid_unproject(0.4, sigmoid_project(0.4, x));
    CHECK(std::abs(back - x) <= 1e-4 * std::max(1.0, std::abs(x)));
  }
  CHECK(sigmoid_unproject(0.4, sigmoid_project(0.4, 2.5)) ==
        doctest::Approx(2.5).epsilon(1e-10));

  CHECK_THROWS_AS(sigmoid_unproject(0.4, 0.0), DomainError);
  CHECK_THROWS_AS(sigmoid_unproject(0.4, 1.0), DomainError);
  CHECK_THROWS_AS(sigmoid_unproject(0.4, -0.3), DomainError);
}

TEST_CASE("sigmoid-plane detrending vanishes on a perfect fit") {
  const std::vector<double> window{0.5, -1.0, 2.0, 0.0};
  LocalTrend trend;
  trend.fitted = window;
  for (double alpha : {0.4, 1.0, 1e-6})
    for (double d : detrend_hmf(alpha, window, trend)) CHECK(d == 0.0);
}

TEST_CASE("sigmoid-plane detrending degenerates to the difference") {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> window(32);
    for (double& v : window) v = rng.next_gaussian() * 4.0;
    const LocalTrend trend = local_trend(window, 2);
    const std::vector<double> standard = detrend_standard(window, trend);
    const std::vector<double> projected = detrend_hmf(1e-6, window, trend);
    std::vector<double> diff(window.size());
    for (std::size_t i = 0; i < window.size(); ++i)
      diff[i] = projected[i] - standard[i];
    CHECK(l2(diff) <= 1e-4 * l2(standard) + 1e-10);
  }
}

TEST_CASE("sigmoid-plane detrending preserves sign") {
  LocalTrend trend;
  trend.fitted.resize(1);
  std::vector<double> window(1);
  for (double phi = -3.0; phi <= 3.0; phi += 0.125) {
    for (double psi = -3.0; psi <= 3.0; psi += 0.125) {
      window[0] = phi;
      trend.fitted[0] = psi;
      const double delta = detrend_hmf(0.4, window, trend)[0];
      if (phi > psi) CHECK(delta > 0.0);
      if (phi < psi) CHECK(delta < 0.0);
      if (phi == psi) CHECK(delta == 0.0);
    }
  }
}

TEST_CASE("local variance") {
  CHECK(local_variance(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
  CHECK(local_variance(std::vector<double>{1.0, -1.0}) == doctest::Approx(1.0));
  CHECK(local_variance(std::vector<double>{3.0}) == doctest::Approx(9.0));
  CHECK_THROWS_AS(local_variance(std::vector<double>{}), InvalidInput);
}

TEST_CASE("fluctuation of constant variances is the constant's root") {
  const std::vector<double> vars(8, 4.0);
  CHECK(fluctuation(vars, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fluctuation(vars, 0.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fluctuation(vars, -2.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("fluctuation rejects degenerate variances") {
  const std::vector<double> with_zero{1.0, 0.0, 2.0};
  CHECK_THROWS_AS(fluctuation(with_zero, -1.0), DegenerateVariance);
  CHECK_THROWS_AS(fluctuation(with_zero, 0.0), DegenerateVariance);
  CHECK_NOTHROW(fluctuation(with_zero, 2.0));
  const std::vector<double> zeros(4, 0.0);
  CHECK_THROWS_AS(fluctuation(zeros, 2.0), DegenerateVariance);
}

TEST_CASE("fluctuation is non-decreasing in q") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> vars(12);
    for (double& v : vars) v = 0.05 + rng.next_unit() * 4.0;
    double prev = 0.0;
    bool first = true;
    for (double q = -5.0; q <= 5.0; q += 0.5) {
      const double f = fluctuation(vars, q);
      if (!first) CHECK(f >= prev - 1e-12 * std::abs(prev));
      prev = f;
      first = false;
    }
  }
}

TEST_CASE("hurst fit recovers exact power laws") {
  const std::vector<std::size_t> scales{16, 32, 64, 128};
  std::vector<double> f;
  for (std::size_t s : scales) f.push_back(3.0 * std::pow(s, 0.7));
  const HurstFit fit = hurst_fit(scales, f);
  CHECK(fit.h == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> flat(scales.size(), 2.5);
  CHECK(hurst_fit(scales, flat).h == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      hurst_fit(std::vector<std::size_t>{16, 32}, std::vector<double>{1.0, 2.0}),
      InsufficientScales);
}

TEST_CASE("hurst fit under multiplicative noise") {
  const std::vector<std::size_t> scales{16, 32, 64, 128, 256};
  Rng rng(8);
  double mean_h = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    std::vector<double> f;
    for (std::size_t s : scales)
      f.push_back(std::pow(s, 0.5) * (1.0 + 0.01 * rng.next_gaussian()));
    const double h = hurst_fit(scales, f).h;
    CHECK(std::abs(h - 0.5) < 0.05);
    mean_h += h / 100.0;
  }
  CHECK(std::abs(mean_h - 0.5) < 0.02);
}

TEST_CASE("white noise has Hurst exponent one half") {
  DfaConfig cfg = DfaConfig::defaults(4096);
  cfg.q_grid = {2.0};
  double mean_h = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TimeSeries noise = gen_white_noise(4096, seed);
    mean_h += compute_hfs(noise, cfg).h[0] / 20.0;
  }
  CHECK(mean_h == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(mean_h - 0.5) < 0.05);
}

TEST_CASE("series shorter than four times the largest scale is rejected") {
  const DfaConfig cfg = DfaConfig::defaults(4096);
  const TimeSeries noise = gen_white_noise(256, 1);
  CHECK_THROWS_AS(compute_hfs(noise, cfg), SeriesTooShort);
}

TEST_CASE("config validation") {
  DfaConfig cfg;
  cfg.q_grid = {2.0};
  cfg.s_grid = {16, 8};
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.s_grid = {3};
  CHECK_THROWS_AS(cfg.validate(), InvalidWindowSize);
  cfg.s_grid = {16, 32};
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("variant degeneracy at the output level") {
  Rng rng(9);
  for (int rep = 0; rep < 3; ++rep) {
    const TimeSeries series = gen_white_noise(1024, 100 + rep);
    DfaConfig standard = DfaConfig::defaults(series.size());
    standard.q_grid = {-4.0, -2.0, 0.0, 2.0, 4.0};
    DfaConfig hmf = standard;
    hmf.variant = DetrendVariant::Hmf;
    hmf.alpha = 1e-6;
    const FractalSeries a = compute_hfs(series, standard);
    const FractalSeries b = compute_hfs(series, hmf);
    for (std::size_t i = 0; i < a.h.size(); ++i)
      CHECK(std::abs(a.h[i] - b.h[i]) < 1e-3);
  }
}

TEST_CASE("standard-variant Hurst estimates are scale invariant") {
  const TimeSeries series = gen_white_noise(1024, 42);
  std::vector<double> scaled_values = series.values();
  for (double& v : scaled_values) v *= 37.5;
  const TimeSeries scaled(std::move(scaled_values));

  DfaConfig cfg = DfaConfig::defaults(series.size());
  cfg.q_grid = {-2.0, 0.0, 2.0};
  const FractalSeries a = compute_hfs(series, cfg);
  const FractalSeries b = compute_hfs(scaled, cfg);
  for (std::size_t i = 0; i < a.h.size(); ++i)
    CHECK(std::abs(a.h[i] - b.h[i]) < 1e-6);
}

TEST_CASE("multifractal width separates cascade from noise") {
  DfaConfig cascade_cfg;
  const TimeSeries cascade = gen_binomial_cascade(13, 0.3);
  cascade_cfg = DfaConfig::defaults(cascade.size());
  const FractalSeries spectrum = compute_hfs(cascade, cascade_cfg);
  double h_min = spectrum.h[0], h_max = spectrum.h[0];
  for (double h : spectrum.h) {
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
  }
  CHECK(h_max - h_min > 0.4);

  // estimator noise at a single seed stays well under the cascade width
  double noise_width_mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TimeSeries noise = gen_white_noise(4096, seed);
    const FractalSeries flat = compute_hfs(noise, DfaConfig::defaults(4096));
    double lo = flat.h[0], hi = flat.h[0];
    for (double h : flat.h) {
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    noise_width_mean += (hi - lo) / 5.0;
  }
  CHECK(noise_width_mean < 0.15);
}

TEST_CASE("cascade Hurst curve matches the closed form") {
  const TimeSeries cascade = gen_binomial_cascade(13, 0.3);
  DfaConfig cfg = DfaConfig::defaults(cascade.size());
  cfg.q_grid = {-5.0, -2.0, 2.0, 5.0};
  const FractalSeries spectrum = compute_hfs(cascade, cfg);
  for (std::size_t i = 0; i < cfg.q_grid.size(); ++i) {
    const double expected = analytic_cascade_hurst(0.3, cfg.q_grid[i]);
    CHECK(std::abs(spectrum.h[i] - expected) < 0.1);
  }
  // monotone non-increasing within estimator slack on the analytic input
  DfaConfig full = DfaConfig::defaults(cascade.size());
  const FractalSeries dense = compute_hfs(cascade, full);
  for (std::size_t i = 1; i < dense.h.size(); ++i)
    CHECK(dense.h[i] <= dense.h[i - 1] + 0.05);
}

TEST_CASE("fractal series CSV serialization") {
  FractalSeries hfs;
  hfs.q_grid = {2.0};
  hfs.h = {0.5};
  hfs.fit_r2 = {1.0};
  CHECK(to_csv(hfs) == "q,h,r2\n2,0.5,1\n");
}
