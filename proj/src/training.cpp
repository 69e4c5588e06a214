#include "mvcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mvcl/adam.hpp"
#include "mvcl/common.hpp"
#include "mvcl/csv.hpp"
#include "mvcl/evaluation.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  curriculum_params().validate();
}

namespace {

constexpr uint64_t kPermSalt = 0xbadc0ffee0ddULL;

uint64_t hash_ints(const std::vector<int>& v) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int x : v) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<unsigned char>(x >> (8 * b));
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<Tensor> snapshot_params(const std::vector<ParamRef>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const ParamRef& p : params) out.push_back(*p.value);
  return out;
}

void restore_params(const std::vector<ParamRef>& params, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < params.size(); ++i) *params[i].value = snap[i];
}

void check_sets(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config) {
  if (train_set.size() == 0) throw DataError("training set is empty");
  if (val_set.size() == 0) throw DataError("validation set is empty (needed for model selection)");
  if (config.selection_metric == TrainConfig::SelectionMetric::kValAuc) {
    for (int c = 0; c < kNumClasses; ++c) {
      if (val_set.class_counts[c] == 0) {
        throw DataError("validation AUC undefined: class " + std::to_string(c) +
                        " missing from the validation set");
      }
    }
  }
}

// One curriculum-ordered pass per epoch; StepFn consumes a batch of sample
// indices and returns its loss, EvalFn returns (accuracy, auc) on validation.
template <typename StepFn, typename EvalFn>
TrainHistory run_epochs(int n_train, const TrainConfig& config, const std::vector<double>& scores,
                        const std::vector<ParamRef>& params, StepFn&& step, EvalFn&& eval_val,
                        std::ostream* log) {
  const CurriculumParams cparams = config.curriculum_params();
  SamplingSchedule schedule = init_probabilities(scores);
  const std::vector<double> initial_p = schedule.probs;

  TrainHistory hist;
  hist.best_metric = -std::numeric_limits<double>::infinity();
  std::vector<Tensor> best;

  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    if (epoch > 1) schedule = advance(schedule, cparams, initial_p);
    const std::vector<int> perm =
        epoch_permutation(schedule, mix_seed(config.seed, kPermSalt + epoch));

    double loss_sum = 0.0;
    int n_batches = 0;
    for (int start = 0; start < n_train; start += config.batch_size) {
      const int stop = std::min(n_train, start + config.batch_size);
      const std::vector<int> batch(perm.begin() + start, perm.begin() + stop);
      const double loss = step(batch);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      }
      loss_sum += loss;
      ++n_batches;
    }

    const auto [val_acc, val_auc] = eval_val();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / n_batches;
    rec.val_accuracy = val_acc;
    rec.val_auc = val_auc;
    rec.schedule_hash = schedule_hash(schedule);
    rec.permutation_hash = hash_ints(perm);
    hist.epochs.push_back(rec);

    const double metric =
        config.selection_metric == TrainConfig::SelectionMetric::kValAuc ? val_auc : val_acc;
    if (log) {
      *log << epoch << "," << csv::format_double(rec.train_loss) << ","
           << csv::format_double(metric) << "\n";
    }
    if (metric > hist.best_metric) {
      hist.best_metric = metric;
      hist.best_epoch = epoch;
      best = snapshot_params(params);
    }
  }
  restore_params(params, best);
  return hist;
}

struct ViewBatch {
  Tensor images;
  std::vector<int> labels;
};

ViewBatch gather(const Dataset& ds, const std::vector<int>& indices, View view) {
  std::vector<const Image*> imgs;
  imgs.reserve(indices.size());
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (int i : indices) {
    imgs.push_back(view == View::kFrontal ? &ds.samples[i].frontal : &ds.samples[i].lateral);
    labels.push_back(ds.samples[i].label);
  }
  return {pack_images(imgs), std::move(labels)};
}

} // namespace

TrainHistory train_multiview(MultiviewModel& model, const Dataset& train_set,
                             const Dataset& val_set, const TrainConfig& config,
                             const DifficultyScoreTable& table, std::ostream* log) {
  config.validate();
  check_sets(train_set, val_set, config);
  const std::vector<double> scores =
      config.curriculum_enabled ? assign_scores(train_set, table, ViewMode::kBoth)
                                : std::vector<double>(train_set.samples.size(), 1.0);

  Adam adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  const std::vector<ParamRef> params = model.params();

  auto step = [&](const std::vector<int>& batch) {
    const ViewBatch fb = gather(train_set, batch, View::kFrontal);
    const ViewBatch lb = gather(train_set, batch, View::kLateral);
    const BranchLogits logits = model.forward(&fb.images, &lb.images, true);
    const double loss = joint_loss(logits, fb.labels);
    model.zero_grads();
    model.backward(cross_entropy_grad(*logits.frontal, fb.labels),
                   cross_entropy_grad(*logits.lateral, fb.labels),
                   cross_entropy_grad(*logits.merge, fb.labels));
    adam.step(params);
    return loss;
  };
  auto eval_val = [&]() {
    const auto records = collect_records(model, val_set, ViewMode::kBoth);
    return std::pair<double, double>(accuracy(records), auc_multiclass(records));
  };
  return run_epochs(train_set.size(), config, scores, params, step, eval_val, log);
}

TrainHistory train_single_view(SingleViewModel& model, const Dataset& train_set,
                               const Dataset& val_set, const TrainConfig& config,
                               const DifficultyScoreTable& table, std::ostream* log) {
  config.validate();
  check_sets(train_set, val_set, config);
  const std::vector<double> scores =
      config.curriculum_enabled
          ? assign_scores(train_set, table, to_view_mode(model.view()))
          : std::vector<double>(train_set.samples.size(), 1.0);

  Adam adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps);
  const std::vector<ParamRef> params = model.params();

  auto step = [&](const std::vector<int>& batch) {
    const ViewBatch vb = gather(train_set, batch, model.view());
    const Tensor logits = model.forward(vb.images, true);
    const double loss = single_view_loss(logits, vb.labels);
    model.zero_grads();
    model.backward(cross_entropy_grad(logits, vb.labels));
    adam.step(params);
    return loss;
  };
  auto eval_val = [&]() {
    const auto records = collect_records(model, val_set);
    return std::pair<double, double>(accuracy(records), auc_multiclass(records));
  };
  return run_epochs(train_set.size(), config, scores, params, step, eval_val, log);
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  csv::Table t;
  t.header = {"epoch", "train_loss", "val_accuracy", "val_auc", "schedule_hash",
              "permutation_hash"};
  for (const EpochRecord& r : history.epochs) {
    t.rows.push_back({std::to_string(r.epoch), csv::format_double(r.train_loss),
                      csv::format_double(r.val_accuracy), csv::format_double(r.val_auc),
                      std::to_string(r.schedule_hash), std::to_string(r.permutation_hash)});
  }
  csv::write_file(path, t);
}

} // namespace mvcl
