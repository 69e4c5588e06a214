#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mvcl {

struct Dataset; // dataset.hpp

// Which view(s) a model consumes. Also selects the difficulty-score row.
enum class ViewMode { kFrontalOnly, kLateralOnly, kBoth };

const char* to_string(ViewMode mode);
ViewMode view_mode_from_string(const std::string& s); // throws ConfigError

// Class-level difficulty scores, one per (class, view mode). Scale runs from
// 1 (hardest) to 100 (easiest).
class DifficultyScoreTable {
public:
  DifficultyScoreTable() = default;

  // The expert-assigned defaults used throughout: frontal (30,30,30),
  // lateral (35,60,45), both (45,65,55) for classes 0..2.
  static DifficultyScoreTable defaults();

  static DifficultyScoreTable from_rows(const std::array<double, 3>& frontal,
                                        const std::array<double, 3>& lateral,
                                        const std::array<double, 3>& both);

  double score(int label, ViewMode mode) const;
  void set(int label, ViewMode mode, double score);

  // All 9 entries set and inside [1, 100]; throws ConfigError otherwise.
  void validate() const;

private:
  // entries_[mode][class]; negative marks unset.
  std::array<std::array<double, 3>, 3> entries_ = {{
      {{-1, -1, -1}}, {{-1, -1, -1}}, {{-1, -1, -1}},
  }};
};

// Decay horizon E' (last epoch whose sampling probabilities differ from
// uniform) and total epoch budget E.
struct CurriculumParams {
  int decay_horizon = 16;  // E'
  int total_epochs = 32;   // E, defaults to 2*E'

  void validate() const; // 1 <= E' <= E
};

// Per-sample sampling distribution at one epoch.
struct SamplingSchedule {
  int epoch = 1;                  // 1-based
  std::vector<double> probs;      // strictly positive, sums to 1

  int n_samples() const { return static_cast<int>(probs.size()); }
  void validate() const;          // invariants above, sum within 1e-12
};

// Looks up each sample's difficulty score for the given view mode. A sample
// carrying an explicit score override uses it instead of the class entry.
std::vector<double> assign_scores(const Dataset& dataset,
                                  const DifficultyScoreTable& table,
                                  ViewMode mode);

// Epoch-1 distribution: p_i = s_i / sum(s).
SamplingSchedule init_probabilities(const std::vector<double>& scores);

// Advances the schedule one epoch. Inside the decay window each probability
// is multiplied by ((1/N) / p_initial_i)^(1/E') and the vector renormalized;
// past the window the distribution is exactly uniform.
SamplingSchedule advance(const SamplingSchedule& schedule,
                         const CurriculumParams& params,
                         const std::vector<double>& initial_p);

// Permutes {0..N-1} by sequential weighted draws without replacement over
// the remaining probability mass. Deterministic for a fixed seed.
std::vector<int> epoch_permutation(const SamplingSchedule& schedule, uint64_t rng_seed);

// Audit dump: one row per (epoch, sample), columns epoch,sample_id,probability,
// covering epochs 1..E of the schedule implied by `scores` and `params`.
void write_schedule_csv(const std::filesystem::path& path,
                        const std::vector<double>& scores,
                        const CurriculumParams& params,
                        const std::vector<std::string>& sample_ids);

// FNV-1a over the probability bytes; recorded per epoch in training history.
uint64_t schedule_hash(const SamplingSchedule& schedule);

} // namespace mvcl
