#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tsfract/errors.hpp"

namespace tsfract {

/// Finite real-valued series. Length and values are fixed at construction;
/// the mean is cached because every profile needs it.
class TimeSeries {
 public:
  explicit TimeSeries(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double mean() const noexcept { return mean_; }

 private:
  std::vector<double> values_;
  double mean_ = 0.0;
};

/// Cumulative sum of the mean-centered series; the object detrending acts on.
/// Telescopes to zero at the last element.
struct ProfileSeries {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - begin; }
};

/// 2*per_direction contiguous windows of equal length: the first
/// per_direction tile forward from index 0, the rest tile backward from the
/// series end (so both directions cover the full series when s does not
/// divide the length).
struct WindowGrid {
  std::size_t window_length = 0;   // s
  std::size_t per_direction = 0;   // W_s
  std::vector<IndexRange> windows; // forward tiles, then backward tiles
};

/// Least-squares polynomial fit over one window, abscissae k = 1..s.
struct LocalTrend {
  std::vector<double> coefficients;  // highest degree first, order + 1 entries
  std::vector<double> fitted;        // polynomial evaluated at k = 1..s
};

ProfileSeries profile(const TimeSeries& series);

/// floor(l / s); throws InvalidWindowSize unless 2 <= s <= l.
std::size_t window_count(std::size_t length, std::size_t window_length);

WindowGrid segment_bidirectional(const ProfileSeries& profile,
                                 std::size_t window_length);

/// Reusable fitter for a fixed (window length, polynomial order). The
/// monomial basis at k = 1..s is factorized once; fitting a window is then a
/// pair of matrix-vector products, safe to call concurrently.
class TrendFitter {
 public:
  TrendFitter(std::size_t window_length, int order);

  LocalTrend fit(std::span<const double> values) const;

  std::size_t window_length() const noexcept { return window_length_; }
  int order() const noexcept { return order_; }

 private:
  std::size_t window_length_;
  int order_;
  Eigen::MatrixXd basis_;   // s x (order+1), columns k^m .. k^0
  Eigen::MatrixXd solver_;  // (order+1) x s pseudoinverse of basis_
};

/// One-shot convenience around TrendFitter.
LocalTrend local_trend(std::span<const double> window_values, int order);

}  // namespace tsfract
