#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mvcl/curriculum.hpp"
#include "mvcl/dataset.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int total_epochs = 32;  // E
  int decay_horizon = 16; // E'
  uint64_t seed = 0;
  bool curriculum_enabled = true;

  enum class SelectionMetric { kValAuc, kValAccuracy };
  SelectionMetric selection_metric = SelectionMetric::kValAuc;

  void validate() const;
  CurriculumParams curriculum_params() const { return {decay_horizon, total_epochs}; }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_auc = 0.0;
  uint64_t schedule_hash = 0;     // hash of the epoch's sampling probabilities
  uint64_t permutation_hash = 0;  // hash of the drawn training order
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = 0.0;
};

// Trains the three-branch model: per epoch, draws the curriculum permutation,
// walks it in consecutive batches (last partial batch kept), takes one Adam
// step per batch on the joint loss, evaluates on the validation set, and
// finally restores the parameters of the best epoch. Deterministic given
// config.seed. `log` receives `epoch,loss,val_metric` lines when non-null.
TrainHistory train_multiview(MultiviewModel& model, const Dataset& train_set,
                             const Dataset& val_set, const TrainConfig& config,
                             const DifficultyScoreTable& table, std::ostream* log = nullptr);

// Same loop over one branch with plain cross-entropy; curriculum scores come
// from the model view's row of the difficulty table.
TrainHistory train_single_view(SingleViewModel& model, const Dataset& train_set,
                               const Dataset& val_set, const TrainConfig& config,
                               const DifficultyScoreTable& table, std::ostream* log = nullptr);

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

} // namespace mvcl
