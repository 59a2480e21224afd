#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsfract/ingest.hpp"
#include "tsfract/series.hpp"

namespace tsfract {

struct GeneratorSpec {
  enum class Kind { WhiteNoise, Fgn, BinomialCascade };

  Kind kind = Kind::WhiteNoise;
  std::size_t length = 1024;  // WhiteNoise/Fgn; Fgn needs a power of two >= 64
  double hurst = 0.5;         // Fgn only, strictly inside (0, 1)
  int levels = 10;            // BinomialCascade only, 4..20
  double p = 0.3;             // BinomialCascade only, strictly inside (0, 1)

  void validate() const;
};

/// i.i.d. standard Gaussians; identical seed gives an identical series on
/// every platform (xoshiro256++ + Box-Muller, see rng.hpp).
TimeSeries gen_white_noise(std::size_t n, std::uint64_t seed);

/// Fractional Gaussian noise by circulant embedding of the exact
/// autocovariance gamma(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2.
/// Exact in distribution; n must be a power of two >= 64.
TimeSeries gen_fgn(std::size_t n, double hurst, std::uint64_t seed);

/// Deterministic binomial measure of length 2^levels: mass 1 split into
/// fractions p (left) and 1-p (right) at every level.
TimeSeries gen_binomial_cascade(int levels, double p);

TimeSeries generate(const GeneratorSpec& spec, std::uint64_t seed);

/// Closed-form generalized Hurst exponent of the binomial measure:
///   H(q) = 1/q - log2(p^q + (1-p)^q) / q
/// At q = 0 the removable singularity is evaluated by a central difference.
double analytic_cascade_hurst(double p, double q);

struct ClassSpec {
  GeneratorSpec generator;
  Labels labels;
  std::size_t count = 1;
};

/// Labeled records, one class per spec, per-record sub-seeds derived from
/// the dataset seed. Class label triples must be distinct.
std::vector<HaERecord> gen_labeled_dataset(std::span<const ClassSpec> classes,
                                           std::uint64_t seed);

}  // namespace tsfract
