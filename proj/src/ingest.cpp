#include "tsfract/ingest.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "tsfract/errors.hpp"
#include "tsfract/rng.hpp"

namespace tsfract {

void Labels::validate() const {
  if (severity < 1 || severity > 5)
    throw SchemaError("severity must be in 1..5");
  if (possibility < 1 || possibility > 5)
    throw SchemaError("possibility must be in 1..5");
  if (risk < 1 || risk > 4) throw SchemaError("risk must be in 1..4");
}

namespace {

using json = nlohmann::json;

[[noreturn]] void schema_fail(std::size_t line, const std::string& what) {
  throw SchemaError("line " + std::to_string(line) + ": " + what);
}

HaERecord parse_one(const json& obj, std::size_t line) {
  if (!obj.is_object()) schema_fail(line, "record is not a JSON object");
  HaERecord rec;
  if (!obj.contains("id") || !obj["id"].is_string())
    schema_fail(line, "missing string field 'id'");
  rec.id = obj["id"].get<std::string>();

  for (const char* key : {"severity", "possibility", "risk"})
    if (!obj.contains(key) || !obj[key].is_number_integer())
      schema_fail(line, std::string("missing integer field '") + key + "'");
  rec.labels.severity = obj["severity"].get<int>();
  rec.labels.possibility = obj["possibility"].get<int>();
  rec.labels.risk = obj["risk"].get<int>();
  try {
    rec.labels.validate();
  } catch (const SchemaError& e) {
    schema_fail(line, e.what());
  }

  const bool has_embedding = obj.contains("embedding");
  const bool has_hts = obj.contains("hts");
  if (has_embedding == has_hts)
    schema_fail(line, "record must carry exactly one of 'embedding' or 'hts'");

  if (has_embedding) {
    const json& emb = obj["embedding"];
    if (!emb.is_array() || emb.empty())
      schema_fail(line, "'embedding' must be a non-empty array of rows");
    const std::size_t tokens = emb.size();
    Eigen::MatrixXd matrix(tokens, kEmbeddingWidth);
    for (std::size_t r = 0; r < tokens; ++r) {
      const json& row = emb[r];
      if (!row.is_array() || row.size() != kEmbeddingWidth)
        schema_fail(line, "embedding row " + std::to_string(r) + " is not " +
                              std::to_string(kEmbeddingWidth) + " wide");
      for (std::size_t c = 0; c < kEmbeddingWidth; ++c) {
        if (!row[c].is_number())
          schema_fail(line, "embedding contains a non-numeric entry");
        matrix(r, c) = row[c].get<double>();
      }
    }
    rec.embedding = std::move(matrix);
  } else {
    const json& hts = obj["hts"];
    if (!hts.is_array() || hts.empty())
      schema_fail(line, "'hts' must be a non-empty array");
    std::vector<double> values;
    values.reserve(hts.size());
    for (const json& v : hts) {
      if (!v.is_number()) schema_fail(line, "'hts' contains a non-numeric entry");
      values.push_back(v.get<double>());
    }
    try {
      rec.hts = TimeSeries(std::move(values));
    } catch (const InvalidInput& e) {
      schema_fail(line, e.what());
    }
  }
  return rec;
}

}  // namespace

std::vector<HaERecord> parse_records(std::istream& in) {
  std::vector<HaERecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(parse_one(obj, line_no));
  }
  return records;
}

void write_records(std::ostream& out, std::span<const HaERecord> records) {
  for (const HaERecord& rec : records) {
    nlohmann::ordered_json obj;
    obj["id"] = rec.id;
    obj["severity"] = rec.labels.severity;
    obj["possibility"] = rec.labels.possibility;
    obj["risk"] = rec.labels.risk;
    if (rec.hts.has_value()) {
      obj["hts"] = rec.hts->values();
    } else if (rec.embedding.has_value()) {
      const Eigen::MatrixXd& m = *rec.embedding;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
      }
      obj["embedding"] = std::move(rows);
    } else {
      throw InvalidInput("record '" + rec.id + "' has no payload");
    }
    out << obj.dump() << '\n';
  }
}

TimeSeries reduce_to_hts(const Eigen::MatrixXd& embedding, ReduceAxis axis) {
  if (embedding.rows() == 0 || embedding.cols() == 0)
    throw InvalidInput("empty embedding matrix");
  std::vector<double> values;
  if (axis == ReduceAxis::OverTokens) {
    values.resize(embedding.cols());
    for (Eigen::Index c = 0; c < embedding.cols(); ++c)
      values[c] = embedding.col(c).mean();
  } else {
    values.resize(embedding.rows());
    for (Eigen::Index r = 0; r < embedding.rows(); ++r)
      values[r] = embedding.row(r).mean();
  }
  return TimeSeries(std::move(values));
}

TimeSeries record_hts(const HaERecord& record, ReduceAxis axis) {
  if (record.hts.has_value()) return *record.hts;
  if (record.embedding.has_value()) return reduce_to_hts(*record.embedding, axis);
  throw InvalidInput("record '" + record.id + "' has no payload");
}

SplitAssignment split_dataset(std::span<const HaERecord> records,
                              std::uint64_t seed) {
  if (records.size() < 10)
    throw InvalidInput("dataset split needs at least 10 records");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n = records.size();
  const std::size_t n_test = n / 10;
  const std::size_t n_val = n / 10;
  const std::size_t n_train = n - n_test - n_val;

  SplitAssignment split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = records[order[i]].id;
    if (i < n_train)
      split.train.push_back(id);
    else if (i < n_train + n_test)
      split.test.push_back(id);
    else
      split.validation.push_back(id);
  }
  return split;
}

}  // namespace tsfract
