#include "tsfract/metrics.hpp"

#include <cstdio>

#include <json.hpp>

#include "tsfract/errors.hpp"

namespace tsfract {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 2) throw InvalidInput("need at least 2 classes");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::add(int actual, int predicted) {
  if (actual < 0 || actual >= num_classes_ || predicted < 0 ||
      predicted >= num_classes_)
    throw InvalidInput("class index out of range");
  ++counts_[static_cast<std::size_t>(actual) * num_classes_ + predicted];
  ++total_;
}

long long ConfusionMatrix::count(int actual, int predicted) const {
  return counts_[static_cast<std::size_t>(actual) * num_classes_ + predicted];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_)
    throw InvalidInput("confusion matrix sizes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

ConfusionMatrix confusion(std::span<const int> predictions,
                          std::span<const int> labels, int num_classes) {
  if (predictions.size() != labels.size())
    throw InvalidInput("predictions and labels lengths differ");
  ConfusionMatrix matrix(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    matrix.add(labels[i], predictions[i]);
  return matrix;
}

ClassMetrics prf1(const ConfusionMatrix& matrix, int cls) {
  long long tp = matrix.count(cls, cls);
  long long fp = 0, fn = 0;
  for (int other = 0; other < matrix.num_classes(); ++other) {
    if (other == cls) continue;
    fp += matrix.count(other, cls);
    fn += matrix.count(cls, other);
  }
  ClassMetrics m;
  if (tp + fp > 0)
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    m.precision_defined = false;
  if (tp + fn > 0)
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else
    m.recall_defined = false;
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

EvalReport macro_report(const ConfusionMatrix& matrix) {
  EvalReport report;
  const int k = matrix.num_classes();
  long long diag = 0;
  for (int c = 0; c < k; ++c) {
    const ClassMetrics m = prf1(matrix, c);
    report.per_class.push_back(m);
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    diag += matrix.count(c, c);
  }
  report.macro_precision /= k;
  report.macro_recall /= k;
  report.macro_f1 /= k;
  report.accuracy = matrix.total() > 0
                        ? static_cast<double>(diag) / matrix.total()
                        : 0.0;
  report.micro_f1 = report.accuracy;
  return report;
}

EvalReport average_reports(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidInput("no reports to average");
  const std::size_t k = reports.front().per_class.size();
  for (const EvalReport& r : reports)
    if (r.per_class.size() != k)
      throw InvalidInput("reports have different class counts");

  EvalReport avg;
  avg.per_class.resize(k);
  avg.repetitions = 0;
  const auto n = static_cast<double>(reports.size());
  for (const EvalReport& r : reports) {
    for (std::size_t c = 0; c < k; ++c) {
      avg.per_class[c].precision += r.per_class[c].precision / n;
      avg.per_class[c].recall += r.per_class[c].recall / n;
      avg.per_class[c].f1 += r.per_class[c].f1 / n;
      avg.per_class[c].precision_defined &= r.per_class[c].precision_defined;
      avg.per_class[c].recall_defined &= r.per_class[c].recall_defined;
    }
    avg.macro_precision += r.macro_precision / n;
    avg.macro_recall += r.macro_recall / n;
    avg.macro_f1 += r.macro_f1 / n;
    avg.micro_f1 += r.micro_f1 / n;
    avg.accuracy += r.accuracy / n;
    avg.repetitions += r.repetitions;
  }
  return avg;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json obj;
  obj["macro"] = {{"precision", report.macro_precision},
                  {"recall", report.macro_recall},
                  {"f1", report.macro_f1}};
  obj["micro"] = {{"f1", report.micro_f1}, {"accuracy", report.accuracy}};
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    classes.push_back({{"level", c + 1},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"precision_defined", m.precision_defined},
                       {"recall_defined", m.recall_defined}});
  }
  obj["per_class"] = std::move(classes);
  obj["repetitions"] = report.repetitions;
  return obj.dump(2);
}

std::string report_csv_row(const std::string& model, const std::string& aspect,
                           const std::string& split, const EvalReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.2f,%.2f,%.2f\n", model.c_str(),
                aspect.c_str(), split.c_str(), 100.0 * report.macro_precision,
                100.0 * report.macro_recall, 100.0 * report.macro_f1);
  return buf;
}

}  // namespace tsfract
