#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvcl/image.hpp"

namespace mvcl {

// Labels: 0 non-fracture, 1 ulnar fracture, 2 radial fracture.
struct Sample {
  std::string id;
  Image frontal;
  Image lateral;
  int label = 0;
  // Optional per-sample difficulty override (manifest `score` column);
  // class-level table entries apply otherwise.
  std::optional<double> score_override;
};

struct Dataset {
  std::vector<Sample> samples;
  std::array<int, 3> class_counts = {0, 0, 0};

  int size() const { return static_cast<int>(samples.size()); }
  int image_height() const { return samples.empty() ? 0 : samples.front().frontal.height; }
  int image_width() const { return samples.empty() ? 0 : samples.front().frontal.width; }

  void recount(); // rebuilds class_counts, revalidates labels/ids/shapes
  Dataset subset(const std::vector<int>& indices) const;
};

// Manifest CSV: header `id,frontal_path,lateral_path,label` plus an optional
// trailing `score` column. Image paths are resolved relative to the manifest's
// directory. Each validation failure carries its own diagnostic.
Dataset load_manifest(const std::filesystem::path& manifest_path);

// Writes images (16-bit grayscale PNG) under `dir/images/` and a manifest CSV
// at `dir/manifest.csv`; returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// K-fold plan with per-split roles. Fold assignment is stratified: per-fold
// class counts deviate from exact proportionality by at most one sample.
struct FoldPlan {
  struct Split {
    int test_fold = 0;
    int val_fold = 0; // chosen among the remaining folds, seeded
  };

  int k = 0;
  std::vector<int> assignments;  // per sample index -> fold
  std::vector<Split> splits;     // one per fold, splits[s].test_fold == s

  std::vector<int> fold_indices(int fold) const;
  std::vector<int> train_indices(int split) const; // all folds except test/val
};

FoldPlan stratified_kfold(const Dataset& dataset, int k, uint64_t seed);

void write_foldplan_csv(const std::filesystem::path& path, const Dataset& dataset,
                        const FoldPlan& plan);

// Deterministic desk-scale data: one geometric pattern per class (bar,
// ellipse, corner wedge) over a noisy background. `view_asymmetry` in [0,1]
// morphs the fracture classes' patterns toward the non-fracture pattern in
// their weaker view: at 0 both views carry the same evidence, at 1 the weak
// view of a fracture class is indistinguishable from non-fracture, so only
// the strong view (lateral for class 1, frontal for class 2) identifies it.
Dataset generate_synthetic(int n_per_class, int image_size, uint64_t seed,
                           double view_asymmetry);

} // namespace mvcl
