#include "mvcl/curriculum.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mvcl/common.hpp"
#include "mvcl/csv.hpp"
#include "mvcl/dataset.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

const char* to_string(ViewMode mode) {
  switch (mode) {
    case ViewMode::kFrontalOnly: return "frontal";
    case ViewMode::kLateralOnly: return "lateral";
    case ViewMode::kBoth: return "both";
  }
  return "?";
}

ViewMode view_mode_from_string(const std::string& s) {
  if (s == "frontal" || s == "frontal-only") return ViewMode::kFrontalOnly;
  if (s == "lateral" || s == "lateral-only") return ViewMode::kLateralOnly;
  if (s == "both") return ViewMode::kBoth;
  throw ConfigError("unknown view mode '" + s + "' (expected frontal|lateral|both)");
}

static int mode_index(ViewMode mode) { return static_cast<int>(mode); }

DifficultyScoreTable DifficultyScoreTable::defaults() {
  return from_rows({30, 30, 30}, {35, 60, 45}, {45, 65, 55});
}

DifficultyScoreTable DifficultyScoreTable::from_rows(const std::array<double, 3>& frontal,
                                                     const std::array<double, 3>& lateral,
                                                     const std::array<double, 3>& both) {
  DifficultyScoreTable t;
  for (int c = 0; c < 3; ++c) {
    t.set(c, ViewMode::kFrontalOnly, frontal[c]);
    t.set(c, ViewMode::kLateralOnly, lateral[c]);
    t.set(c, ViewMode::kBoth, both[c]);
  }
  t.validate();
  return t;
}

double DifficultyScoreTable::score(int label, ViewMode mode) const {
  if (label < 0 || label >= kNumClasses) {
    throw ConfigError("difficulty score lookup for label " + std::to_string(label) +
                      " outside {0,1,2}");
  }
  const double s = entries_[mode_index(mode)][label];
  if (s < 0) {
    throw ConfigError(std::string("difficulty score table has no entry for (class ") +
                      std::to_string(label) + ", view " + to_string(mode) + ")");
  }
  return s;
}

void DifficultyScoreTable::set(int label, ViewMode mode, double score) {
  entries_[mode_index(mode)][label] = score;
}

void DifficultyScoreTable::validate() const {
  for (int m = 0; m < 3; ++m) {
    for (int c = 0; c < 3; ++c) {
      const double s = entries_[m][c];
      if (s < 0) {
        throw ConfigError(std::string("difficulty score table missing entry for (class ") +
                          std::to_string(c) + ", view " +
                          to_string(static_cast<ViewMode>(m)) + ")");
      }
      if (s < 1.0 || s > 100.0) {
        throw ConfigError("difficulty score " + csv::format_double(s) + " for (class " +
                          std::to_string(c) + ", view " + to_string(static_cast<ViewMode>(m)) +
                          ") outside [1,100]");
      }
    }
  }
}

void CurriculumParams::validate() const {
  if (decay_horizon < 1) throw ConfigError("decay horizon E' must be >= 1");
  if (total_epochs < decay_horizon) {
    throw ConfigError("total epochs E (" + std::to_string(total_epochs) +
                      ") must be >= decay horizon E' (" + std::to_string(decay_horizon) + ")");
  }
}

void SamplingSchedule::validate() const {
  if (probs.empty()) throw ConfigError("sampling schedule over empty dataset");
  if (epoch < 1) throw ConfigError("sampling schedule epoch must be >= 1");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0)) throw ConfigError("sampling probability must be positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("sampling probabilities sum to " + csv::format_double(sum) +
                      ", expected 1 within 1e-12");
  }
}

std::vector<double> assign_scores(const Dataset& dataset,
                                  const DifficultyScoreTable& table,
                                  ViewMode mode) {
  std::vector<double> scores;
  scores.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) {
    scores.push_back(s.score_override ? *s.score_override : table.score(s.label, mode));
  }
  return scores;
}

SamplingSchedule init_probabilities(const std::vector<double>& scores) {
  if (scores.empty()) throw ConfigError("cannot build sampling schedule for an empty dataset");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s > 0.0)) {
      throw ConfigError("difficulty scores must be positive, got " + csv::format_double(s));
    }
    sum += s;
  }
  SamplingSchedule sched;
  sched.epoch = 1;
  sched.probs.reserve(scores.size());
  for (double s : scores) sched.probs.push_back(s / sum);
  return sched;
}

static void renormalize(std::vector<double>& p) {
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
}

SamplingSchedule advance(const SamplingSchedule& schedule,
                         const CurriculumParams& params,
                         const std::vector<double>& initial_p) {
  params.validate();
  if (initial_p.size() != schedule.probs.size()) {
    throw ConfigError("initial distribution size does not match schedule");
  }
  const int n = schedule.n_samples();
  SamplingSchedule next;
  next.epoch = schedule.epoch + 1;
  if (next.epoch > params.decay_horizon) {
    next.probs.assign(n, 1.0 / n);
    return next;
  }
  const double uniform = 1.0 / n;
  next.probs.resize(n);
  for (int i = 0; i < n; ++i) {
    const double decay = std::pow(uniform / initial_p[i], 1.0 / params.decay_horizon);
    next.probs[i] = schedule.probs[i] * decay;
  }
  renormalize(next.probs);
  return next;
}

std::vector<int> epoch_permutation(const SamplingSchedule& schedule, uint64_t rng_seed) {
  schedule.validate();
  const int n = schedule.n_samples();
  std::vector<double> weight = schedule.probs;
  std::vector<int> perm(n);
  Rng rng(rng_seed);
  for (int pos = 0; pos < n; ++pos) {
    // Recompute the remaining mass each draw so depletion never drifts.
    double total = 0.0;
    for (double w : weight) total += w;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) continue;
      acc += weight[i];
      if (u < acc) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) { // u == total under roundoff; take the last live index
      for (int i = n - 1; i >= 0; --i) {
        if (weight[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    perm[pos] = chosen;
    weight[chosen] = 0.0;
  }
  return perm;
}

void write_schedule_csv(const std::filesystem::path& path,
                        const std::vector<double>& scores,
                        const CurriculumParams& params,
                        const std::vector<std::string>& sample_ids) {
  params.validate();
  if (sample_ids.size() != scores.size()) {
    throw ConfigError("sample id list does not match score vector");
  }
  csv::Table t;
  t.header = {"epoch", "sample_id", "probability"};
  SamplingSchedule sched = init_probabilities(scores);
  const std::vector<double> initial = sched.probs;
  for (int e = 1; e <= params.total_epochs; ++e) {
    if (e > 1) sched = advance(sched, params, initial);
    for (int i = 0; i < sched.n_samples(); ++i) {
      t.rows.push_back({std::to_string(e), sample_ids[i], csv::format_double(sched.probs[i])});
    }
  }
  csv::write_file(path, t);
}

uint64_t schedule_hash(const SamplingSchedule& schedule) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int epoch = schedule.epoch;
  mix(&epoch, sizeof(epoch));
  mix(schedule.probs.data(), schedule.probs.size() * sizeof(double));
  return h;
}

} // namespace mvcl
