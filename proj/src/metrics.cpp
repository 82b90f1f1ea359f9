#include "drseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "drseg/image_io.hpp"

namespace drseg {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ContractError("confusion: mask dimensions differ");
  }
  if (pred.pixel_count() == 0) throw ContractError("confusion: empty masks");
  pred.validate();
  truth.validate();
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0;
    const bool t = truth.values[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (!p && !t) {
      ++c.tn;
    } else if (p && !t) {
      ++c.fp;
    } else {
      ++c.fn;
    }
  }
  return c;
}

RatioMetrics ratio_metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw ContractError("ratio_metrics: empty confusion counts");
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) {
    throw ContractError("ratio_metrics: negative counts");
  }
  RatioMetrics m;
  const double tp = double(c.tp), tn = double(c.tn), fp = double(c.fp), fn = double(c.fn);

  m.accuracy = (tp + tn) / double(c.total());

  // Each ratio has the form X / (X + errors); a zero denominator implies
  // zero error mass, which counts as a (flagged) perfect score.
  auto safe_ratio = [&m](double num, double den) {
    if (den == 0.0) {
      m.degenerate = true;
      return 1.0;
    }
    return num / den;
  };
  m.specificity = safe_ratio(tn, tn + fp);
  m.sensitivity = safe_ratio(tp, tp + fn);
  m.precision = safe_ratio(tp, tp + fp);
  if (m.precision + m.sensitivity == 0.0) {
    m.degenerate = true;
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  }
  m.iou = safe_ratio(tp, tp + fp + fn);
  return m;
}

ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ContractError("error_metrics: element count mismatch");
  if (pred.empty()) throw ContractError("error_metrics: empty inputs");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = truth[i] - pred[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = double(pred.size());
  return {abs_sum / n, sq_sum / n};
}

RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ContractError("roc_auc: size mismatch");
  long long positives = 0, negatives = 0;
  for (std::uint8_t l : labels) {
    if (l > 1) throw ContractError("roc_auc: labels must be 0/1");
    l ? ++positives : ++negatives;
  }
  if (positives == 0 || negatives == 0) {
    throw ContractError("roc_auc: AUC undefined without both classes present");
  }

  // Group tied scores, sweep thresholds from high to low.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);

  long long tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double threshold = scores[idx[i]];
    long long tied_pos = 0, tied_neg = 0;
    while (i < idx.size() && scores[idx[i]] == threshold) {
      labels[idx[i]] ? ++tied_pos : ++tied_neg;
      ++i;
    }
    const double prev_fpr = double(fp) / negatives;
    const double prev_tpr = double(tp) / positives;
    tp += tied_pos;
    fp += tied_neg;
    const double cur_fpr = double(fp) / negatives;
    const double cur_tpr = double(tp) / positives;
    auc += (cur_fpr - prev_fpr) * (prev_tpr + cur_tpr) / 2.0;  // trapezoid over the tie block

    curve.thresholds.push_back(threshold);
    curve.fpr.push_back(cur_fpr);
    curve.tpr.push_back(cur_tpr);
  }
  curve.auc = auc;
  return curve;
}

MetricReport evaluate_class(const Predictor& predictor, const std::vector<SampleRecord>& test,
                            LesionClass lesion, const EvalOptions& options) {
  if (test.empty()) throw ContractError("evaluate_class: empty test list");
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw ContractError("evaluate_class: threshold must lie in (0, 1)");
  }

  MetricReport report;
  report.lesion = lesion;
  report.threshold = options.threshold;
  report.images = static_cast<long long>(test.size());

  ConfusionCounts pooled;
  double abs_sum = 0.0, sq_sum = 0.0;
  long long pixel_count = 0;
  std::vector<double> roc_scores;
  std::vector<std::uint8_t> roc_labels;
  double macro_acc = 0, macro_spec = 0, macro_sens = 0, macro_prec = 0, macro_f1 = 0, macro_iou = 0;

  for (const SampleRecord& rec : test) {
    BinaryMask truth =
        options.truth_loader ? options.truth_loader(rec) : read_mask(rec.mask_path);
    Tensor probs = predictor(rec, truth);
    if (probs.ndim() != 2 || probs.dim(0) != truth.height || probs.dim(1) != truth.width) {
      throw ContractError("evaluate_class: prediction shape does not match the truth mask");
    }

    BinaryMask pred(truth.height, truth.width);
    for (std::int64_t i = 0; i < probs.numel(); ++i) {
      const double p = probs[i];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ContractError("evaluate_class: probability outside [0, 1]");
      }
      pred.values[static_cast<std::size_t>(i)] = p >= options.threshold ? 1 : 0;
      const double y = truth.values[static_cast<std::size_t>(i)];
      abs_sum += std::abs(y - p);
      sq_sum += (y - p) * (y - p);
    }
    pixel_count += probs.numel();

    const ConfusionCounts c = confusion(pred, truth);
    pooled += c;
    if (options.aggregation == Aggregation::kMacro) {
      const RatioMetrics r = ratio_metrics(c);
      macro_acc += r.accuracy;
      macro_spec += r.specificity;
      macro_sens += r.sensitivity;
      macro_prec += r.precision;
      macro_f1 += r.f1;
      macro_iou += r.iou;
    }
    for (std::int64_t i = 0; i < probs.numel(); ++i) {
      roc_scores.push_back(probs[i]);
      roc_labels.push_back(truth.values[static_cast<std::size_t>(i)]);
    }
  }

  report.counts = pooled;
  if (options.aggregation == Aggregation::kMicro) {
    report.ratios = ratio_metrics(pooled);
  } else {
    const double n = double(test.size());
    report.ratios.accuracy = macro_acc / n;
    report.ratios.specificity = macro_spec / n;
    report.ratios.sensitivity = macro_sens / n;
    report.ratios.precision = macro_prec / n;
    report.ratios.f1 = macro_f1 / n;
    report.ratios.iou = macro_iou / n;
  }
  report.mae = abs_sum / double(pixel_count);
  report.mse = sq_sum / double(pixel_count);

  bool has_pos = false, has_neg = false;
  for (std::uint8_t l : roc_labels) (l ? has_pos : has_neg) = true;
  if (has_pos && has_neg) {
    report.auc = roc_auc(roc_scores, roc_labels).auc;
  } else {
    report.auc = 1.0;  // single-class pool: fall back to the vacuous score
  }
  if (options.roc_scores) *options.roc_scores = std::move(roc_scores);
  if (options.roc_labels) *options.roc_labels = std::move(roc_labels);
  return report;
}

std::string format_report(const MetricReport& report) {
  std::ostringstream os;
  char buf[64];
  os << "report_version: " << report.metrics_version << '\n';
  os << "lesion: " << to_string(report.lesion) << '\n';
  os << "images: " << report.images << '\n';
  os << "threshold: " << report.threshold << '\n';
  os << "tp: " << report.counts.tp << '\n';
  os << "tn: " << report.counts.tn << '\n';
  os << "fp: " << report.counts.fp << '\n';
  os << "fn: " << report.counts.fn << '\n';
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    os << key << ": " << buf << '\n';
  };
  line("accuracy", report.ratios.accuracy);
  line("specificity", report.ratios.specificity);
  line("sensitivity", report.ratios.sensitivity);
  line("precision", report.ratios.precision);
  line("f1", report.ratios.f1);
  line("iou", report.ratios.iou);
  line("mae", report.mae);
  line("mse", report.mse);
  line("auc", report.auc);
  os << "degenerate: " << (report.ratios.degenerate ? 1 : 0) << '\n';
  return os.str();
}

void save_report(const MetricReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << format_report(report);
  if (!out) throw IoError("write failure on " + path.string());
}

MetricReport parse_report(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t colon = line.find(": ");
    if (colon == std::string::npos) continue;
    kv[line.substr(0, colon)] = line.substr(colon + 2);
  }
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ContractError("report missing field '" + key + "'");
    return it->second;
  };
  MetricReport r;
  r.metrics_version = need("report_version");
  r.lesion = lesion_from_string(need("lesion"));
  r.images = std::stoll(need("images"));
  r.threshold = std::stod(need("threshold"));
  r.counts.tp = std::stoll(need("tp"));
  r.counts.tn = std::stoll(need("tn"));
  r.counts.fp = std::stoll(need("fp"));
  r.counts.fn = std::stoll(need("fn"));
  r.ratios.accuracy = std::stod(need("accuracy"));
  r.ratios.specificity = std::stod(need("specificity"));
  r.ratios.sensitivity = std::stod(need("sensitivity"));
  r.ratios.precision = std::stod(need("precision"));
  r.ratios.f1 = std::stod(need("f1"));
  r.ratios.iou = std::stod(need("iou"));
  r.mae = std::stod(need("mae"));
  r.mse = std::stod(need("mse"));
  r.auc = std::stod(need("auc"));
  r.ratios.degenerate = need("degenerate") == "1";
  return r;
}

MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

std::string format_summary_table(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  os << "Metric       ";
  for (const MetricReport& r : reports) {
    char cell[16];
    std::snprintf(cell, sizeof(cell), " %10s", to_string(r.lesion).c_str());
    os << cell;
  }
  os << '\n';
  auto row = [&](const char* name, auto getter) {
    char cell[32];
    std::snprintf(cell, sizeof(cell), "%-13s", name);
    os << cell;
    for (const MetricReport& r : reports) {
      std::snprintf(cell, sizeof(cell), " %10.5f", getter(r));
      os << cell;
    }
    os << '\n';
  };
  row("Accuracy", [](const MetricReport& r) { return r.ratios.accuracy; });
  row("Specificity", [](const MetricReport& r) { return r.ratios.specificity; });
  row("Sensitivity", [](const MetricReport& r) { return r.ratios.sensitivity; });
  row("F1 Score", [](const MetricReport& r) { return r.ratios.f1; });
  row("IoU", [](const MetricReport& r) { return r.ratios.iou; });
  row("MAE", [](const MetricReport& r) { return r.mae; });
  row("MSE", [](const MetricReport& r) { return r.mse; });
  row("AUC", [](const MetricReport& r) { return r.auc; });
  return os.str();
}

void save_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ROC csv " + path.string());
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9f,%.9f\n", curve.thresholds[i], curve.fpr[i],
                  curve.tpr[i]);
    out << buf;
  }
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace drseg
