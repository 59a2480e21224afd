#include "tsfract/synth.hpp"

#include <algorithm>
#include <complex>
#include <cmath>

#include "tsfract/errors.hpp"
#include "tsfract/rng.hpp"

namespace tsfract {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey, unnormalized forward DFT. The embedding
// length is always a power of two, so this is all the FFT we need.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double fgn_autocov(double hurst, std::size_t k) {
  const double two_h = 2.0 * hurst;
  const auto kd = static_cast<double>(k);
  return 0.5 * (std::pow(kd + 1.0, two_h) - 2.0 * std::pow(kd, two_h) +
                std::pow(std::abs(kd - 1.0), two_h));
}

}  // namespace

void GeneratorSpec::validate() const {
  switch (kind) {
    case Kind::WhiteNoise:
      if (length == 0) throw InvalidInput("length must be positive");
      break;
    case Kind::Fgn:
      if (!is_power_of_two(length) || length < 64)
        throw InvalidInput("fGn length must be a power of two >= 64");
      if (!(hurst > 0.0 && hurst < 1.0))
        throw InvalidInput("fGn Hurst parameter must be strictly inside (0, 1)");
      break;
    case Kind::BinomialCascade:
      if (levels < 4 || levels > 20)
        throw InvalidInput("cascade levels must be in 4..20");
      if (!(p > 0.0 && p < 1.0))
        throw InvalidInput("cascade p must be strictly inside (0, 1)");
      break;
  }
}

TimeSeries gen_white_noise(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("length must be positive");
  Rng rng(seed);
  std::vector<double> values(n);
  for (double& v : values) v = rng.next_gaussian();
  return TimeSeries(std::move(values));
}

TimeSeries gen_fgn(std::size_t n, double hurst, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::Fgn;
  spec.length = n;
  spec.hurst = hurst;
  spec.validate();

  const std::size_t m = 2 * n;
  std::vector<std::complex<double>> row(m);
  for (std::size_t k = 0; k <= n; ++k) row[k] = fgn_autocov(hurst, k);
  for (std::size_t k = 1; k < n; ++k) row[m - k] = row[k];
  fft(row);

  std::vector<double> lambda(m);
  for (std::size_t k = 0; k < m; ++k) {
    lambda[k] = row[k].real();
    if (lambda[k] < -1e-9)
      throw NumericalFailure("circulant embedding produced a negative eigenvalue");
    lambda[k] = std::max(lambda[k], 0.0);
  }

  Rng rng(seed);
  std::vector<std::complex<double>> spectrum(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double re = rng.next_gaussian();
    const double im = rng.next_gaussian();
    spectrum[k] = std::sqrt(lambda[k]) * std::complex<double>(re, im);
  }
  fft(spectrum);

  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = spectrum[i].real() * scale;
  return TimeSeries(std::move(values));
}

TimeSeries gen_binomial_cascade(int levels, double p) {
  GeneratorSpec spec;
  spec.kind = GeneratorSpec::Kind::BinomialCascade;
  spec.levels = levels;
  spec.p = p;
  spec.validate();

  std::vector<double> mass{1.0};
  for (int level = 0; level < levels; ++level) {
    std::vector<double> next(mass.size() * 2);
    for (std::size_t i = 0; i < mass.size(); ++i) {
      next[2 * i] = mass[i] * p;
      next[2 * i + 1] = mass[i] * (1.0 - p);
    }
    mass = std::move(next);
  }
  return TimeSeries(std::move(mass));
}

TimeSeries generate(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case GeneratorSpec::Kind::WhiteNoise:
      return gen_white_noise(spec.length, seed);
    case GeneratorSpec::Kind::Fgn:
      return gen_fgn(spec.length, spec.hurst, seed);
    case GeneratorSpec::Kind::BinomialCascade:
      return gen_binomial_cascade(spec.levels, spec.p);
  }
  throw InvalidInput("unknown generator kind");
}

double analytic_cascade_hurst(double p, double q) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidInput("cascade p must be strictly inside (0, 1)");
  const auto value = [p](double qq) {
    return 1.0 / qq - std::log2(std::pow(p, qq) + std::pow(1.0 - p, qq)) / qq;
  };
  if (q == 0.0) {
    const double delta = 1e-4;
    return 0.5 * (value(delta) + value(-delta));
  }
  return value(q);
}

std::vector<HaERecord> gen_labeled_dataset(std::span<const ClassSpec> classes,
                                           std::uint64_t seed) {
  if (classes.size() < 2) throw InvalidInput("need at least 2 classes");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].count < 1) throw InvalidInput("class counts must be >= 1");
    classes[i].labels.validate();
    classes[i].generator.validate();
    for (std::size_t j = i + 1; j < classes.size(); ++j)
      if (classes[i].labels == classes[j].labels)
        throw InvalidInput("duplicate class label triple");
  }

  std::vector<HaERecord> records;
  std::uint64_t stream = 0;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const ClassSpec& cls = classes[ci];
    for (std::size_t r = 0; r < cls.count; ++r) {
      HaERecord rec;
      char id[32];
      std::snprintf(id, sizeof(id), "c%zu-%05zu", ci, r);
      rec.id = id;
      rec.labels = cls.labels;
      rec.hts = generate(cls.generator, derive_seed(seed, stream++));
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace tsfract
