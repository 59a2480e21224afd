#pragma once

#include <span>
#include <string>
#include <vector>

namespace tsfract {

/// Rows are actual classes, columns predicted; indices 0-based.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(int actual, int predicted);
  long long count(int actual, int predicted) const;
  int num_classes() const noexcept { return num_classes_; }
  long long total() const noexcept { return total_; }

  /// Element-wise merge of shards accumulated separately.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  int num_classes_;
  long long total_ = 0;
  std::vector<long long> counts_;  // row-major
};

ConfusionMatrix confusion(std::span<const int> predictions,
                          std::span<const int> labels, int num_classes);

/// One-vs-rest metrics; zero denominators yield 0 with the corresponding
/// flag cleared, never NaN.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
};

ClassMetrics prf1(const ConfusionMatrix& matrix, int cls);

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // micro precision == micro recall == accuracy for single-label multiclass
  double micro_f1 = 0.0;
  double accuracy = 0.0;
  int repetitions = 1;
};

/// Unweighted macro average over all classes, micro alongside.
EvalReport macro_report(const ConfusionMatrix& matrix);

/// Elementwise arithmetic mean over repetitions.
EvalReport average_reports(std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& report);

/// One results-table row: model,aspect,split,P,R,F1 with percentages.
std::string report_csv_row(const std::string& model, const std::string& aspect,
                           const std::string& split, const EvalReport& report);

}  // namespace tsfract
