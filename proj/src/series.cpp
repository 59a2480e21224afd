#include "tsfract/series.hpp"

#include <cmath>
#include <numeric>

namespace tsfract {

TimeSeries::TimeSeries(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInput("time series must not be empty");
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidInput("time series contains a non-finite value");
    sum += v;
  }
  mean_ = sum / static_cast<double>(values_.size());
}

ProfileSeries profile(const TimeSeries& series) {
  const double mu = series.mean();
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i] - mu;
    out[i] = acc;
  }
  return ProfileSeries{std::move(out)};
}

std::size_t window_count(std::size_t length, std::size_t window_length) {
  if (window_length < 2)
    throw InvalidWindowSize("window length must be at least 2");
  if (length < window_length)
    throw InvalidWindowSize("window length exceeds series length");
  return length / window_length;
}

WindowGrid segment_bidirectional(const ProfileSeries& profile,
                                 std::size_t window_length) {
  const std::size_t l = profile.size();
  const std::size_t s = window_length;
  const std::size_t w = window_count(l, s);

  WindowGrid grid;
  grid.window_length = s;
  grid.per_direction = w;
  grid.windows.reserve(2 * w);
  for (std::size_t n = 0; n < w; ++n)
    grid.windows.push_back({n * s, (n + 1) * s});
  for (std::size_t n = 0; n < w; ++n)
    grid.windows.push_back({l - (n + 1) * s, l - n * s});
  return grid;
}

TrendFitter::TrendFitter(std::size_t window_length, int order)
    : window_length_(window_length), order_(order) {
  if (order < 1) throw InvalidInput("polynomial order must be at least 1");
  if (window_length <= static_cast<std::size_t>(order))
    throw UnderdeterminedFit("window length must exceed polynomial order");

  const auto s = static_cast<Eigen::Index>(window_length);
  const Eigen::Index cols = order + 1;
  basis_.resize(s, cols);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double k = static_cast<double>(i + 1);
    double power = 1.0;
    for (Eigen::Index j = cols - 1; j >= 0; --j) {
      basis_(i, j) = power;
      power *= k;
    }
  }
  // Complete orthogonal decomposition: stable for the monomial basis at
  // s up to ~1024 and yields the minimum-norm solution if rank-deficient.
  // pinv(B) = pinv(B^T)^T; factorizing the (order+1) x s transpose keeps the
  // pseudoinverse at order+1 right-hand sides instead of s.
  Eigen::MatrixXd basis_t = basis_.transpose();
  solver_ = basis_t.completeOrthogonalDecomposition().pseudoInverse().transpose();
}

LocalTrend TrendFitter::fit(std::span<const double> values) const {
  if (values.size() != window_length_)
    throw InvalidInput("window length does not match fitter");
  const Eigen::Map<const Eigen::VectorXd> y(values.data(),
                                            static_cast<Eigen::Index>(values.size()));
  LocalTrend trend;
  const Eigen::VectorXd coeffs = solver_ * y;
  const Eigen::VectorXd fitted = basis_ * coeffs;
  trend.coefficients.assign(coeffs.data(), coeffs.data() + coeffs.size());
  trend.fitted.assign(fitted.data(), fitted.data() + fitted.size());
  return trend;
}

LocalTrend local_trend(std::span<const double> window_values, int order) {
  return TrendFitter(window_values.size(), order).fit(window_values);
}

}  // namespace tsfract
