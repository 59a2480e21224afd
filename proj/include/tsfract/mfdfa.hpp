#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsfract/series.hpp"

namespace tsfract {

enum class DetrendVariant { Standard, Hmf };

struct DfaConfig {
  std::vector<double> q_grid;        // fractal orders
  std::vector<std::size_t> s_grid;   // window lengths, strictly increasing
  int order = 2;                     // detrending polynomial order
  double alpha = 0.4;                // sigmoid scaling index, Hmf variant only
  DetrendVariant variant = DetrendVariant::Standard;

  /// -5 .. +5 in steps of 0.25 (41 points, includes 0 and 2).
  static std::vector<double> default_q_grid();
  /// 16 geometrically spaced integers from 16 to floor(length/4), deduplicated.
  static std::vector<std::size_t> default_s_grid(std::size_t length);
  static DfaConfig defaults(std::size_t length);

  static std::vector<std::size_t> geometric_s_grid(std::size_t s_min,
                                                   std::size_t s_max,
                                                   int points);

  void validate() const;
};

/// F_q(s) for every (q, s) pair, all entries positive and finite.
struct FluctuationSurface {
  std::vector<double> q_grid;
  std::vector<std::size_t> s_grid;
  std::vector<double> values;  // row-major, q index major

  double at(std::size_t qi, std::size_t si) const {
    return values[qi * s_grid.size() + si];
  }
  double& at(std::size_t qi, std::size_t si) {
    return values[qi * s_grid.size() + si];
  }
};

/// Generalized Hurst exponent H(q) per grid point with the log-log fit
/// quality alongside.
struct FractalSeries {
  std::vector<double> q_grid;
  std::vector<double> h;
  std::vector<double> fit_r2;
};

struct HurstFit {
  double h = 0.0;
  double r2 = 0.0;
};

struct HfsResult {
  FractalSeries hfs;
  FluctuationSurface surface;
  std::size_t clamp_events = 0;  // Hmf unproject-domain clamps, diagnostics
};

std::vector<double> detrend_standard(std::span<const double> window,
                                     const LocalTrend& trend);

double sigmoid_project(double alpha, double x);
double sigmoid_unproject(double alpha, double y);

/// Sigmoid-plane detrending: project window and trend, difference, recenter
/// by +1/2 so equal inputs map to zero, clamp into the open unit interval,
/// unproject. Degenerates to detrend_standard as alpha -> 0.
std::vector<double> detrend_hmf(double alpha, std::span<const double> window,
                                const LocalTrend& trend,
                                std::size_t* clamp_events = nullptr);

double local_variance(std::span<const double> detrended);

/// q-order generalized mean of the per-window variances:
///   q != 0: { mean [sigma^2]^(q/2) }^(1/q)
///   q == 0: exp( mean ln sigma^2 / 2 )
/// Evaluated in log space so extreme negative q stays finite.
double fluctuation(std::span<const double> variances, double q);

/// Ordinary least squares of ln F against ln s. The estimator sits behind
/// this one call so an alternative curve fit can be swapped in.
HurstFit hurst_fit(std::span<const std::size_t> s_grid,
                   std::span<const double> f_values);

/// Full pipeline: profile, bidirectional windows, local trends, detrending
/// (variant-selected), variances, fluctuation surface, per-q power-law fits.
/// Scales are processed in parallel; every (q, s) cell has its own slot and
/// all reductions run in a fixed order, so results do not depend on the
/// number of threads.
HfsResult compute_hfs_full(const TimeSeries& series, const DfaConfig& config);
FractalSeries compute_hfs(const TimeSeries& series, const DfaConfig& config);

/// CSV serialization: header `q,h,r2`, one row per grid point, 17
/// significant digits.
std::string to_csv(const FractalSeries& hfs);

namespace reference {

/// Plain serial implementation with its own polynomial fit (scaled normal
/// equations) and direct power-mean evaluation. Kept as an independent
/// cross-check and as the baseline for the benchmark tool.
FractalSeries compute_hfs(const TimeSeries& series, const DfaConfig& config);

}  // namespace reference

}  // namespace tsfract
