#include "mvcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvcl/common.hpp"
#include "mvcl/csv.hpp"

namespace mvcl {

bool MetricsReport::complete() const {
  for (double v : {accuracy, auc, balanced_accuracy, binary_accuracy, binary_auc}) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
  }
  return true;
}

static void require_nonempty(std::span<const EvalRecord> records, const char* metric) {
  if (records.empty()) {
    throw DataError(std::string(metric) + " is undefined on an empty record set");
  }
}

double accuracy(std::span<const EvalRecord> records) {
  require_nonempty(records, "accuracy");
  int hits = 0;
  for (const EvalRecord& r : records) {
    if (argmax_lowest(r.probs.data(), kNumClasses) == r.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double balanced_accuracy(std::span<const EvalRecord> records) {
  require_nonempty(records, "balanced accuracy");
  std::array<int, 3> total = {0, 0, 0}, correct = {0, 0, 0};
  for (const EvalRecord& r : records) {
    ++total[r.label];
    if (argmax_lowest(r.probs.data(), kNumClasses) == r.label) ++correct[r.label];
  }
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (total[c] == 0) {
      throw DataError("balanced accuracy undefined: class " + std::to_string(c) +
                      " has no records");
    }
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  }
  return sum / kNumClasses;
}

// Mann-Whitney rank statistic with midranks for ties, so tied pairs count 1/2.
static double rank_auc(const std::vector<double>& scores, const std::vector<bool>& positive,
                       const char* what) {
  const size_t n = scores.size();
  int64_t n_pos = std::count(positive.begin(), positive.end(), true);
  int64_t n_neg = static_cast<int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError(std::string(what) + " undefined: needs at least one positive and one "
                    "negative example");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j); // 1-based average
    for (size_t t = i; t < j; ++t) {
      if (positive[order[t]]) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_multiclass(std::span<const EvalRecord> records) {
  require_nonempty(records, "multiclass AUC");
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> scores;
    std::vector<bool> positive;
    scores.reserve(records.size());
    positive.reserve(records.size());
    for (const EvalRecord& r : records) {
      scores.push_back(r.probs[c]);
      positive.push_back(r.label == c);
    }
    sum += rank_auc(scores, positive, "one-vs-rest AUC");
  }
  return sum / kNumClasses;
}

std::vector<BinaryRecord> binarize(std::span<const EvalRecord> records) {
  std::vector<BinaryRecord> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records) {
    out.push_back({r.label == 0 ? 0 : 1, 1.0 - r.probs[0]});
  }
  return out;
}

double binary_accuracy(std::span<const EvalRecord> records) {
  require_nonempty(records, "binary accuracy");
  int hits = 0;
  for (const EvalRecord& r : records) {
    const int pred = argmax_lowest(r.probs.data(), kNumClasses) == 0 ? 0 : 1;
    const int truth = r.label == 0 ? 0 : 1;
    if (pred == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double binary_accuracy_threshold(std::span<const BinaryRecord> records, double threshold) {
  if (records.empty()) throw DataError("binary accuracy undefined on an empty record set");
  int hits = 0;
  for (const BinaryRecord& r : records) {
    if ((r.score >= threshold ? 1 : 0) == r.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double binary_auc(std::span<const BinaryRecord> records) {
  if (records.empty()) throw DataError("binary AUC undefined on an empty record set");
  std::vector<double> scores;
  std::vector<bool> positive;
  scores.reserve(records.size());
  positive.reserve(records.size());
  for (const BinaryRecord& r : records) {
    scores.push_back(r.score);
    positive.push_back(r.label == 1);
  }
  return rank_auc(scores, positive, "binary AUC");
}

MetricsReport compute_metrics(std::span<const EvalRecord> records) {
  MetricsReport rep;
  rep.accuracy = accuracy(records);
  rep.auc = auc_multiclass(records);
  rep.balanced_accuracy = balanced_accuracy(records);
  rep.binary_accuracy = binary_accuracy(records);
  const auto bin = binarize(records);
  rep.binary_auc = binary_auc(bin);
  return rep;
}

namespace {

// Batched inference keeps the per-sample conv GEMMs but amortizes dispatch.
constexpr int kEvalBatch = 64;

std::array<double, 3> row_probs(const Tensor& probs, int64_t row) {
  return {probs[row * 3 + 0], probs[row * 3 + 1], probs[row * 3 + 2]};
}

} // namespace

std::vector<EvalRecord> collect_records(MultiviewModel& model, const Dataset& dataset,
                                        ViewMode mode) {
  std::vector<EvalRecord> out;
  out.reserve(dataset.samples.size());
  const int n = dataset.size();
  for (int start = 0; start < n; start += kEvalBatch) {
    const int stop = std::min(n, start + kEvalBatch);
    std::vector<const Image*> frontal, lateral;
    for (int i = start; i < stop; ++i) {
      frontal.push_back(&dataset.samples[i].frontal);
      lateral.push_back(&dataset.samples[i].lateral);
    }
    const bool use_frontal = mode != ViewMode::kLateralOnly;
    const bool use_lateral = mode != ViewMode::kFrontalOnly;
    Tensor fb, lb;
    if (use_frontal) fb = pack_images(frontal);
    if (use_lateral) lb = pack_images(lateral);
    const BranchLogits logits =
        model.forward(use_frontal ? &fb : nullptr, use_lateral ? &lb : nullptr, false);
    const Tensor* branch_logits = nullptr;
    Branch source = Branch::kMerge;
    if (mode == ViewMode::kBoth) {
      branch_logits = &*logits.merge;
      source = Branch::kMerge;
    } else if (mode == ViewMode::kFrontalOnly) {
      branch_logits = &*logits.frontal;
      source = Branch::kFrontal;
    } else {
      branch_logits = &*logits.lateral;
      source = Branch::kLateral;
    }
    const Tensor probs = softmax_rows(*branch_logits);
    for (int i = start; i < stop; ++i) {
      out.push_back({dataset.samples[i].id, dataset.samples[i].label,
                     row_probs(probs, i - start), source});
    }
  }
  return out;
}

std::vector<EvalRecord> collect_records(SingleViewModel& model, const Dataset& dataset) {
  std::vector<EvalRecord> out;
  out.reserve(dataset.samples.size());
  const bool frontal = model.view() == View::kFrontal;
  const Branch source = frontal ? Branch::kFrontal : Branch::kLateral;
  const int n = dataset.size();
  for (int start = 0; start < n; start += kEvalBatch) {
    const int stop = std::min(n, start + kEvalBatch);
    std::vector<const Image*> images;
    for (int i = start; i < stop; ++i) {
      images.push_back(frontal ? &dataset.samples[i].frontal : &dataset.samples[i].lateral);
    }
    const Tensor batch = pack_images(images);
    const Tensor probs = softmax_rows(model.forward(batch, false));
    for (int i = start; i < stop; ++i) {
      out.push_back({dataset.samples[i].id, dataset.samples[i].label,
                     row_probs(probs, i - start), source});
    }
  }
  return out;
}

void write_records_csv(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  csv::Table t;
  t.header = {"id", "y", "p0", "p1", "p2", "source_branch"};
  for (const EvalRecord& r : records) {
    t.rows.push_back({r.id, std::to_string(r.label), csv::format_double(r.probs[0]),
                      csv::format_double(r.probs[1]), csv::format_double(r.probs[2]),
                      to_string(r.source_branch)});
  }
  csv::write_file(path, t);
}

std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expect = {"id", "y", "p0", "p1", "p2", "source_branch"};
  if (t.header != expect) {
    throw DataError(path.string() + ": expected header id,y,p0,p1,p2,source_branch");
  }
  std::vector<EvalRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    EvalRecord r;
    r.id = row[0];
    r.label = std::stoi(row[1]);
    if (r.label < 0 || r.label >= kNumClasses) {
      throw DataError(path.string() + ": label outside {0,1,2} for id '" + r.id + "'");
    }
    for (int c = 0; c < 3; ++c) r.probs[c] = std::stod(row[2 + c]);
    if (row[5] == "frontal") {
      r.source_branch = Branch::kFrontal;
    } else if (row[5] == "lateral") {
      r.source_branch = Branch::kLateral;
    } else if (row[5] == "merge") {
      r.source_branch = Branch::kMerge;
    } else {
      throw DataError(path.string() + ": unknown source branch '" + row[5] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
  csv::Table t;
  t.header = {"accuracy", "auc", "balanced_accuracy", "binary_accuracy", "binary_auc"};
  t.rows.push_back({csv::format_double(report.accuracy), csv::format_double(report.auc),
                    csv::format_double(report.balanced_accuracy),
                    csv::format_double(report.binary_accuracy),
                    csv::format_double(report.binary_auc)});
  csv::write_file(path, t);
}

} // namespace mvcl
