#include "tsfract/mfdfa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

namespace tsfract {

std::vector<double> DfaConfig::default_q_grid() {
  std::vector<double> q;
  for (int i = -20; i <= 20; ++i) q.push_back(0.25 * i);
  return q;
}

std::vector<std::size_t> DfaConfig::geometric_s_grid(std::size_t s_min,
                                                     std::size_t s_max,
                                                     int points) {
  if (s_max < s_min)
    throw SeriesTooShort("series too short for the requested scale grid");
  if (points < 1) throw InvalidInput("scale grid needs at least one point");
  std::vector<std::size_t> s;
  const double ratio = static_cast<double>(s_max) / static_cast<double>(s_min);
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    const auto v = static_cast<std::size_t>(
        std::llround(s_min * std::pow(ratio, t)));
    if (s.empty() || v > s.back()) s.push_back(v);
  }
  return s;
}

std::vector<std::size_t> DfaConfig::default_s_grid(std::size_t length) {
  return geometric_s_grid(16, length / 4, 16);
}

DfaConfig DfaConfig::defaults(std::size_t length) {
  DfaConfig cfg;
  cfg.q_grid = default_q_grid();
  cfg.s_grid = default_s_grid(length);
  return cfg;
}

void DfaConfig::validate() const {
  if (q_grid.empty()) throw InvalidInput("q grid must not be empty");
  for (double q : q_grid)
    if (!std::isfinite(q)) throw InvalidInput("q grid contains a non-finite value");
  if (s_grid.empty()) throw InvalidInput("scale grid must not be empty");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (i > 0 && s_grid[i] <= s_grid[i - 1])
      throw InvalidInput("scale grid must be strictly increasing");
    if (s_grid[i] < static_cast<std::size_t>(order) + 2)
      throw InvalidWindowSize("every scale must be at least order + 2");
  }
  if (order < 1) throw InvalidInput("polynomial order must be at least 1");
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
}

std::vector<double> detrend_standard(std::span<const double> window,
                                     const LocalTrend& trend) {
  if (window.size() != trend.fitted.size())
    throw InvalidInput("window and trend lengths differ");
  std::vector<double> out(window.size());
  for (std::size_t t = 0; t < window.size(); ++t)
    out[t] = window[t] - trend.fitted[t];
  return out;
}

double sigmoid_project(double alpha, double x) {
  return 1.0 / (1.0 + std::exp(-alpha * x));
}

double sigmoid_unproject(double alpha, double y) {
  if (!(y > 0.0 && y < 1.0))
    throw DomainError("sigmoid_unproject requires y in (0, 1)");
  return std::log(y / (1.0 - y)) / alpha;
}

std::vector<double> detrend_hmf(double alpha, std::span<const double> window,
                                const LocalTrend& trend,
                                std::size_t* clamp_events) {
  if (window.size() != trend.fitted.size())
    throw InvalidInput("window and trend lengths differ");
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  constexpr double kEps = 1e-12;
  std::vector<double> out(window.size());
  for (std::size_t t = 0; t < window.size(); ++t) {
    const double diff = sigmoid_project(alpha, window[t]) -
                        sigmoid_project(alpha, trend.fitted[t]);
    double y = diff + 0.5;
    if (y < kEps || y > 1.0 - kEps) {
      y = std::clamp(y, kEps, 1.0 - kEps);
      if (clamp_events != nullptr) ++*clamp_events;
    }
    out[t] = sigmoid_unproject(alpha, y);
  }
  return out;
}

double local_variance(std::span<const double> detrended) {
  if (detrended.empty()) throw InvalidInput("empty detrended window");
  double acc = 0.0;
  for (double d : detrended) acc += d * d;
  return acc / static_cast<double>(detrended.size());
}

double fluctuation(std::span<const double> variances, double q) {
  if (variances.empty()) throw InvalidInput("no variances given");
  bool any_positive = false;
  for (double v : variances) {
    if (v < 0.0 || !std::isfinite(v)) throw InvalidInput("invalid variance");
    if (v > 0.0) any_positive = true;
    if (v == 0.0 && q <= 0.0)
      throw DegenerateVariance("zero variance with non-positive q");
  }
  if (!any_positive) throw DegenerateVariance("all variances are zero");

  const auto n = static_cast<double>(variances.size());
  if (q == 0.0) {
    double acc = 0.0;
    for (double v : variances) acc += std::log(v);
    return std::exp(0.5 * acc / n);
  }
  // log-sum-exp over a_n = (q/2) ln sigma^2_n
  double max_a = -std::numeric_limits<double>::infinity();
  for (double v : variances) {
    const double a = 0.5 * q * std::log(v);
    if (a > max_a) max_a = a;
  }
  double acc = 0.0;
  for (double v : variances) acc += std::exp(0.5 * q * std::log(v) - max_a);
  return std::exp((max_a + std::log(acc / n)) / q);
}

HurstFit hurst_fit(std::span<const std::size_t> s_grid,
                   std::span<const double> f_values) {
  if (s_grid.size() != f_values.size())
    throw InvalidInput("scale and fluctuation lengths differ");
  if (s_grid.size() < 3)
    throw InsufficientScales("power-law fit needs at least 3 scales");
  const std::size_t n = s_grid.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(f_values[i] > 0.0) || !std::isfinite(f_values[i]))
      throw InvalidInput("fluctuation values must be positive and finite");
    x[i] = std::log(static_cast<double>(s_grid[i]));
    y[i] = std::log(f_values[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  HurstFit fit;
  fit.h = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = my + fit.h * (x[i] - mx);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  fit.r2 = syy <= 1e-30 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

namespace {

// Per-window variances for one scale; shared by parallel and serial paths.
std::vector<double> scale_variances(const ProfileSeries& prof,
                                    std::size_t s, const DfaConfig& config,
                                    std::size_t* clamp_events) {
  const WindowGrid grid = segment_bidirectional(prof, s);
  const TrendFitter fitter(s, config.order);
  std::vector<double> vars(grid.windows.size());
  for (std::size_t w = 0; w < grid.windows.size(); ++w) {
    const IndexRange range = grid.windows[w];
    const std::span<const double> values(prof.values.data() + range.begin,
                                         range.size());
    const LocalTrend trend = fitter.fit(values);
    const std::vector<double> detrended =
        config.variant == DetrendVariant::Hmf
            ? detrend_hmf(config.alpha, values, trend, clamp_events)
            : detrend_standard(values, trend);
    vars[w] = local_variance(detrended);
  }
  return vars;
}

}  // namespace

HfsResult compute_hfs_full(const TimeSeries& series, const DfaConfig& config) {
  config.validate();
  const std::size_t max_s = config.s_grid.back();
  if (series.size() < 4 * max_s)
    throw SeriesTooShort("series length must be at least 4x the largest scale");

  const ProfileSeries prof = profile(series);
  const std::size_t nq = config.q_grid.size();
  const std::size_t ns = config.s_grid.size();

  HfsResult result;
  result.surface.q_grid = config.q_grid;
  result.surface.s_grid = config.s_grid;
  result.surface.values.assign(nq * ns, 0.0);

  std::vector<std::size_t> clamp_per_scale(ns, 0);
  std::vector<std::exception_ptr> scale_error(ns);

  // Scales are independent; each (q, s) cell is written exactly once, so the
  // schedule cannot change the result.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(ns); ++si) {
    try {
      const std::vector<double> vars = scale_variances(
          prof, config.s_grid[si], config, &clamp_per_scale[si]);
      for (std::size_t qi = 0; qi < nq; ++qi)
        result.surface.at(qi, si) = fluctuation(vars, config.q_grid[qi]);
    } catch (const DegenerateVariance& e) {
      std::string what = std::string(e.what()) + " at scale " +
                         std::to_string(config.s_grid[si]);
      if (config.variant == DetrendVariant::Hmf)
        what += " (the sigmoid plane saturates once |alpha * profile| passes"
                " ~37; reduce alpha for large-amplitude series)";
      scale_error[si] = std::make_exception_ptr(DegenerateVariance(what));
    } catch (...) {
      scale_error[si] = std::current_exception();
    }
  }
  for (std::size_t si = 0; si < ns; ++si)
    if (scale_error[si]) std::rethrow_exception(scale_error[si]);
  for (std::size_t si = 0; si < ns; ++si)
    result.clamp_events += clamp_per_scale[si];

  result.hfs.q_grid = config.q_grid;
  result.hfs.h.resize(nq);
  result.hfs.fit_r2.resize(nq);
  std::vector<double> row(ns);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    for (std::size_t si = 0; si < ns; ++si) row[si] = result.surface.at(qi, si);
    const HurstFit fit = hurst_fit(config.s_grid, row);
    result.hfs.h[qi] = fit.h;
    result.hfs.fit_r2[qi] = fit.r2;
  }
  return result;
}

FractalSeries compute_hfs(const TimeSeries& series, const DfaConfig& config) {
  return compute_hfs_full(series, config).hfs;
}

std::string to_csv(const FractalSeries& hfs) {
  std::string out = "q,h,r2\n";
  char buf[96];
  for (std::size_t i = 0; i < hfs.q_grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", hfs.q_grid[i],
                  hfs.h[i], hfs.fit_r2[i]);
    out += buf;
  }
  return out;
}

namespace reference {
namespace {

// Polynomial least squares through normal equations on the scaled basis
// (k/s)^j, solved by Gaussian elimination with partial pivoting. Returns the
// fitted values only.
std::vector<double> fit_poly_values(std::span<const double> y, int order) {
  const std::size_t s = y.size();
  const int cols = order + 1;
  std::vector<std::vector<double>> basis(s, std::vector<double>(cols));
  for (std::size_t i = 0; i < s; ++i) {
    const double k = static_cast<double>(i + 1) / static_cast<double>(s);
    double power = 1.0;
    for (int j = 0; j < cols; ++j) {
      basis[i][j] = power;
      power *= k;
    }
  }
  std::vector<std::vector<double>> ata(cols, std::vector<double>(cols, 0.0));
  std::vector<double> aty(cols, 0.0);
  for (std::size_t i = 0; i < s; ++i)
    for (int a = 0; a < cols; ++a) {
      for (int b = 0; b < cols; ++b) ata[a][b] += basis[i][a] * basis[i][b];
      aty[a] += basis[i][a] * y[i];
    }
  for (int col = 0; col < cols; ++col) {
    int pivot = col;
    for (int r = col + 1; r < cols; ++r)
      if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
    std::swap(ata[col], ata[pivot]);
    std::swap(aty[col], aty[pivot]);
    for (int r = col + 1; r < cols; ++r) {
      const double factor = ata[r][col] / ata[col][col];
      for (int c = col; c < cols; ++c) ata[r][c] -= factor * ata[col][c];
      aty[r] -= factor * aty[col];
    }
  }
  std::vector<double> coef(cols);
  for (int r = cols - 1; r >= 0; --r) {
    double acc = aty[r];
    for (int c = r + 1; c < cols; ++c) acc -= ata[r][c] * coef[c];
    coef[r] = acc / ata[r][r];
  }
  std::vector<double> fitted(s, 0.0);
  for (std::size_t i = 0; i < s; ++i)
    for (int j = 0; j < cols; ++j) fitted[i] += basis[i][j] * coef[j];
  return fitted;
}

}  // namespace

FractalSeries compute_hfs(const TimeSeries& series, const DfaConfig& config) {
  config.validate();
  if (series.size() < 4 * config.s_grid.back())
    throw SeriesTooShort("series length must be at least 4x the largest scale");

  const std::size_t l = series.size();
  const double mu = series.mean();
  std::vector<double> prof(l);
  double acc = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    acc += series[i] - mu;
    prof[i] = acc;
  }

  const std::size_t nq = config.q_grid.size();
  const std::size_t ns = config.s_grid.size();
  std::vector<std::vector<double>> surface(nq, std::vector<double>(ns));

  for (std::size_t si = 0; si < ns; ++si) {
    const std::size_t s = config.s_grid[si];
    const std::size_t w = l / s;
    std::vector<std::size_t> starts;
    for (std::size_t n = 0; n < w; ++n) starts.push_back(n * s);
    for (std::size_t n = 0; n < w; ++n) starts.push_back(l - (n + 1) * s);

    std::vector<double> vars;
    for (std::size_t start : starts) {
      const std::span<const double> window(prof.data() + start, s);
      const std::vector<double> trend = fit_poly_values(window, config.order);
      double var = 0.0;
      for (std::size_t t = 0; t < s; ++t) {
        double delta;
        if (config.variant == DetrendVariant::Hmf) {
          const double diff = sigmoid_project(config.alpha, window[t]) -
                              sigmoid_project(config.alpha, trend[t]);
          const double y = std::clamp(diff + 0.5, 1e-12, 1.0 - 1e-12);
          delta = std::log(y / (1.0 - y)) / config.alpha;
        } else {
          delta = window[t] - trend[t];
        }
        var += delta * delta;
      }
      vars.push_back(var / static_cast<double>(s));
    }

    for (std::size_t qi = 0; qi < nq; ++qi) {
      const double q = config.q_grid[qi];
      double f;
      if (q == 0.0) {
        double lsum = 0.0;
        for (double v : vars) {
          if (v <= 0.0) throw DegenerateVariance("zero variance with q = 0");
          lsum += std::log(v);
        }
        f = std::exp(0.5 * lsum / static_cast<double>(vars.size()));
      } else {
        double mean = 0.0;
        for (double v : vars) {
          if (v <= 0.0 && q < 0.0)
            throw DegenerateVariance("zero variance with negative q");
          mean += std::pow(v, 0.5 * q);
        }
        mean /= static_cast<double>(vars.size());
        f = std::pow(mean, 1.0 / q);
      }
      surface[qi][si] = f;
    }
  }

  FractalSeries out;
  out.q_grid = config.q_grid;
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const HurstFit fit = hurst_fit(config.s_grid, surface[qi]);
    out.h.push_back(fit.h);
    out.fit_r2.push_back(fit.r2);
  }
  return out;
}

}  // namespace reference
}  // namespace tsfract
