#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsfract/series.hpp"

namespace tsfract {

inline constexpr int kEmbeddingWidth = 768;

/// Severity and possibility have five levels, risk has four.
struct Labels {
  int severity = 1;
  int possibility = 1;
  int risk = 1;

  void validate() const;
  bool operator==(const Labels&) const = default;
};

/// One labeled sample: either a precomputed time series or a tokens x 768
/// embedding matrix still to be reduced.
struct HaERecord {
  std::string id;
  Labels labels;
  std::optional<Eigen::MatrixXd> embedding;
  std::optional<TimeSeries> hts;
};

enum class ReduceAxis {
  OverTokens,  // mean across token rows -> 768-length series (default)
  OverDims,    // mean across embedding columns -> tokens-length series
};

/// Parse JSONL records, one object per line:
///   {"id": str, "severity": int, "possibility": int, "risk": int,
///    "embedding": [[f64 x 768] x tokens]}  or  {..., "hts": [f64 x l]}
/// Exactly one of embedding/hts per record. Malformed lines raise ParseError
/// or SchemaError carrying the line number.
std::vector<HaERecord> parse_records(std::istream& in);

void write_records(std::ostream& out, std::span<const HaERecord> records);

TimeSeries reduce_to_hts(const Eigen::MatrixXd& embedding, ReduceAxis axis);

/// The record's series: the hts payload if present, otherwise the reduced
/// embedding.
TimeSeries record_hts(const HaERecord& record, ReduceAxis axis);

/// Disjoint, exhaustive 8:1:1 partition; remainders go to train.
struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::string> validation;
  std::uint64_t seed = 0;
};

SplitAssignment split_dataset(std::span<const HaERecord> records,
                              std::uint64_t seed);

}  // namespace tsfract
