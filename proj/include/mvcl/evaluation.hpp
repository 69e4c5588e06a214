#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvcl/curriculum.hpp"
#include "mvcl/dataset.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

// One evaluated sample: ground truth plus the class probabilities of the
// branch that made the call.
struct EvalRecord {
  std::string id;
  int label = 0;
  std::array<double, 3> probs = {0, 0, 0};
  Branch source_branch = Branch::kMerge;
};

struct MetricsReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  double binary_accuracy = 0.0;
  double binary_auc = 0.0;

  bool complete() const; // all five inside [0,1] and finite
};

struct BinaryRecord {
  int label = 0;    // 0 stays 0, fracture classes map to 1
  double score = 0; // 1 - p(class 0)
};

// Fraction of records whose argmax (ties to the lowest index) hits the label.
double accuracy(std::span<const EvalRecord> records);

// Mean per-class recall; every class must appear.
double balanced_accuracy(std::span<const EvalRecord> records);

// Macro one-vs-rest AUC using each class's own probability as the score;
// tied pairs contribute one half. Every class needs a positive and a
// negative example.
double auc_multiclass(std::span<const EvalRecord> records);

std::vector<BinaryRecord> binarize(std::span<const EvalRecord> records);

// Label-level binary accuracy: argmax first, then 0 vs {1,2}.
double binary_accuracy(std::span<const EvalRecord> records);

// Score-threshold variant over binarized records.
double binary_accuracy_threshold(std::span<const BinaryRecord> records, double threshold = 0.5);

double binary_auc(std::span<const BinaryRecord> records);

MetricsReport compute_metrics(std::span<const EvalRecord> records);

// Runs the model over a dataset under the given view mode (merge probabilities
// when both views feed in, the single branch's otherwise).
std::vector<EvalRecord> collect_records(MultiviewModel& model, const Dataset& dataset,
                                        ViewMode mode);
std::vector<EvalRecord> collect_records(SingleViewModel& model, const Dataset& dataset);

// CSV `id,y,p0,p1,p2,source_branch`.
void write_records_csv(const std::filesystem::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path);

// One-row CSV in the reporting column order.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

} // namespace mvcl
