#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drseg/dataset.hpp"
#include "drseg/image.hpp"
#include "drseg/tensor.hpp"

namespace drseg {

/// Metric definitions revision recorded in every report.
inline constexpr const char* kMetricsVersion = "drseg-metrics-v1";

struct ConfusionCounts {
  long long tp = 0;
  long long tn = 0;
  long long fp = 0;
  long long fn = 0;

  long long total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
  }
};

/// Per-pixel tally; positive class = lesion (1). Throws ContractError on
/// dimension mismatch (masks are validated to be strictly binary).
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

/// Ratio metrics over one confusion table. A ratio whose denominator is
/// zero has no error mass by construction and reports 1.0; F1 with
/// precision + recall = 0 reports 0.0. Either case sets `degenerate`.
struct RatioMetrics {
  double accuracy = 0.0;
  double specificity = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  bool degenerate = false;
};
RatioMetrics ratio_metrics(const ConfusionCounts& c);

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
};
/// Computed on soft probabilities against {0,1} labels.
ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth);

struct RocCurve {
  std::vector<double> thresholds;  // descending
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Threshold sweep over the unique scores (descending), trapezoidal AUC.
/// Requires at least one positive and one negative label; throws
/// ContractError otherwise (undefined AUC).
RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MetricReport {
  LesionClass lesion = LesionClass::EX;
  ConfusionCounts counts;
  RatioMetrics ratios;
  double mae = 0.0;
  double mse = 0.0;
  double auc = 0.0;
  double threshold = 0.5;
  long long images = 0;
  std::string metrics_version = kMetricsVersion;
};

enum class Aggregation { kMicro, kMacro };

/// Probability source for evaluation: maps a test record to a per-pixel
/// foreground probability map shaped like the ground-truth mask.
using Predictor = std::function<Tensor(const SampleRecord&, const BinaryMask& truth)>;

struct EvalOptions {
  double threshold = 0.5;
  Aggregation aggregation = Aggregation::kMicro;
  /// Loads the ground truth for a record; defaults to reading the mask
  /// file as stored (pipelines override it to apply their resize).
  std::function<BinaryMask(const SampleRecord&)> truth_loader;
  /// Filled with pooled (score, label) pairs for the ROC export.
  std::vector<double>* roc_scores = nullptr;
  std::vector<std::uint8_t>* roc_labels = nullptr;
};

/// Evaluates one lesion class over its test records: confusion counts are
/// pooled over all pixels (micro) before the ratio metrics; MAE/MSE and
/// the ROC run on the pre-threshold probabilities.
MetricReport evaluate_class(const Predictor& predictor, const std::vector<SampleRecord>& test,
                            LesionClass lesion, const EvalOptions& options = {});

/// Text serialization (key: value lines) and its inverse.
std::string format_report(const MetricReport& report);
void save_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport parse_report(const std::string& text);
MetricReport load_report(const std::filesystem::path& path);

/// Four-column summary table in the style of the per-class score tables.
std::string format_summary_table(const std::vector<MetricReport>& reports);

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

}  // namespace drseg
