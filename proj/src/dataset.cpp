#include "mvcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_set>

#include "mvcl/common.hpp"
#include "mvcl/csv.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

void Dataset::recount() {
  class_counts = {0, 0, 0};
  std::unordered_set<std::string> ids;
  for (const Sample& s : samples) {
    if (s.label < 0 || s.label >= kNumClasses) {
      throw DataError("sample '" + s.id + "' has label " + std::to_string(s.label) +
                      " outside {0,1,2}");
    }
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
    if (s.frontal.pixels.empty() || s.lateral.pixels.empty()) {
      throw DataError("sample '" + s.id + "' is missing a view");
    }
    if (s.frontal.height != samples.front().frontal.height ||
        s.frontal.width != samples.front().frontal.width ||
        s.lateral.height != s.frontal.height || s.lateral.width != s.frontal.width) {
      throw DataError("sample '" + s.id + "' image size differs from the rest of the dataset");
    }
    ++class_counts[s.label];
  }
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.samples.reserve(indices.size());
  for (int i : indices) out.samples.push_back(samples[i]);
  out.recount();
  return out;
}

Dataset load_manifest(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw DataError("manifest file does not exist: " + manifest_path.string());
  }
  const csv::Table t = csv::read_file(manifest_path);
  const std::vector<std::string> required = {"id", "frontal_path", "lateral_path", "label"};
  if (t.header.size() < 4 || !std::equal(required.begin(), required.end(), t.header.begin())) {
    throw DataError(manifest_path.string() +
                    ": manifest header must start with id,frontal_path,lateral_path,label");
  }
  const bool has_score = t.header.size() >= 5 && t.header[4] == "score";

  const auto base = manifest_path.parent_path();
  Dataset ds;
  ds.samples.reserve(t.rows.size());
  std::unordered_set<std::string> seen;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string rowpos = "row " + std::to_string(r + 2); // header is line 1
    Sample s;
    s.id = row[0];
    if (s.id.empty()) throw DataError(manifest_path.string() + ": empty id at " + rowpos);
    if (!seen.insert(s.id).second) {
      throw DataError(manifest_path.string() + ": duplicate id '" + s.id + "' at " + rowpos);
    }
    char* end = nullptr;
    const long label = std::strtol(row[3].c_str(), &end, 10);
    if (end == row[3].c_str() || *end != '\0' || label < 0 || label >= kNumClasses) {
      throw DataError(manifest_path.string() + ": label '" + row[3] + "' outside {0,1,2} at " +
                      rowpos + " (id '" + s.id + "')");
    }
    s.label = static_cast<int>(label);

    for (int view = 0; view < 2; ++view) {
      const char* name = view == 0 ? "frontal" : "lateral";
      const std::filesystem::path p = base / row[1 + view];
      if (!std::filesystem::exists(p)) {
        throw DataError(manifest_path.string() + ": missing " + name + " image for id '" +
                        s.id + "': " + p.string());
      }
      (view == 0 ? s.frontal : s.lateral) = read_png_gray(p);
    }

    if (has_score && !row[4].empty()) {
      const double score = std::strtod(row[4].c_str(), &end);
      if (end == row[4].c_str() || *end != '\0') {
        throw DataError(manifest_path.string() + ": bad score '" + row[4] + "' at " + rowpos);
      }
      s.score_override = score;
    }
    ds.samples.push_back(std::move(s));
  }
  ds.recount();
  return ds;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  const auto image_dir = dir / "images";
  std::filesystem::create_directories(image_dir);
  csv::Table t;
  t.header = {"id", "frontal_path", "lateral_path", "label"};
  const bool any_override = std::any_of(dataset.samples.begin(), dataset.samples.end(),
                                        [](const Sample& s) { return s.score_override.has_value(); });
  if (any_override) t.header.push_back("score");
  for (const Sample& s : dataset.samples) {
    const std::string fname_f = "images/" + s.id + "_frontal.png";
    const std::string fname_l = "images/" + s.id + "_lateral.png";
    write_png_gray16(dir / fname_f, s.frontal);
    write_png_gray16(dir / fname_l, s.lateral);
    std::vector<std::string> row = {s.id, fname_f, fname_l, std::to_string(s.label)};
    if (any_override) {
      row.push_back(s.score_override ? csv::format_double(*s.score_override) : "");
    }
    t.rows.push_back(std::move(row));
  }
  const auto manifest = dir / "manifest.csv";
  csv::write_file(manifest, t);
  return manifest;
}

std::vector<int> FoldPlan::fold_indices(int fold) const {
  std::vector<int> out;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FoldPlan::train_indices(int split) const {
  const Split& sp = splits[split];
  std::vector<int> out;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != sp.test_fold && assignments[i] != sp.val_fold) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

FoldPlan stratified_kfold(const Dataset& dataset, int k, uint64_t seed) {
  if (k < 3) throw ConfigError("k-fold needs K >= 3 (test, validation and training folds)");
  for (int c = 0; c < kNumClasses; ++c) {
    if (dataset.class_counts[c] > 0 && dataset.class_counts[c] < k) {
      throw DataError("stratification infeasible: class " + std::to_string(c) + " has " +
                      std::to_string(dataset.class_counts[c]) + " samples, fewer than K=" +
                      std::to_string(k));
    }
  }
  if (dataset.size() == 0) throw DataError("cannot split an empty dataset");

  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(dataset.size(), -1);

  // Per class: shuffle, then deal round-robin from a random starting fold so
  // remainder samples do not pile onto the low-numbered folds.
  Rng rng(mix_seed(seed, 0x5f01d));
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<int> idx;
    for (int i = 0; i < dataset.size(); ++i) {
      if (dataset.samples[i].label == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    rng.shuffle(idx);
    const int start = static_cast<int>(rng.below(k));
    for (size_t j = 0; j < idx.size(); ++j) {
      plan.assignments[idx[j]] = (start + static_cast<int>(j)) % k;
    }
  }

  plan.splits.resize(k);
  for (int s = 0; s < k; ++s) {
    plan.splits[s].test_fold = s;
    Rng pick(mix_seed(seed, 0xa11d + s));
    int val = static_cast<int>(pick.below(k - 1));
    if (val >= s) ++val; // skip the test fold
    plan.splits[s].val_fold = val;
  }
  return plan;
}

void write_foldplan_csv(const std::filesystem::path& path, const Dataset& dataset,
                        const FoldPlan& plan) {
  csv::Table t;
  t.header = {"id", "fold"};
  for (size_t i = 0; i < plan.assignments.size(); ++i) {
    t.rows.push_back({dataset.samples[i].id, std::to_string(plan.assignments[i])});
  }
  csv::write_file(path, t);
}

namespace {

// Pattern masks are drawn in unit coordinates so any image size >= 16 works.
class PatternRenderer {
public:
  PatternRenderer(int size, double cy, double cx, double scale)
      : size_(size), cy_(cy), cx_(cx), scale_(scale) {}

  double mask(int label, int y, int x) const {
    const double u = (y + 0.5) / size_ - cy_;
    const double v = (x + 0.5) / size_ - cx_;
    switch (label) {
      case 0: { // horizontal bar
        const double hh = 0.055 * scale_, hw = 0.32 * scale_;
        return (std::abs(u) <= hh && std::abs(v) <= hw) ? 1.0 : 0.0;
      }
      case 1: { // upright ellipse
        const double ry = 0.23 * scale_, rx = 0.14 * scale_;
        const double d = (u / ry) * (u / ry) + (v / rx) * (v / rx);
        return d <= 1.0 ? 1.0 : 0.0;
      }
      default: { // corner wedge below-right of center
        const double s = 0.34 * scale_;
        return (u >= 0 && v >= 0 && u + v <= s) ? 1.0 : 0.0;
      }
    }
  }

private:
  int size_;
  double cy_, cx_, scale_;
};

Image render_view(int label, double distinct, int size, Rng& rng) {
  const double cy = 0.5 + rng.uniform(-0.0625, 0.0625);
  const double cx = 0.5 + rng.uniform(-0.0625, 0.0625);
  const double scale = 1.0 + rng.uniform(-0.1, 0.1);
  const PatternRenderer pat(size, cy, cx, scale);
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double shape =
          distinct * pat.mask(label, y, x) + (1.0 - distinct) * pat.mask(0, y, x);
      double v = 0.2 + 0.55 * shape + 0.03 * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      // Snap to the 16-bit grid so a PNG round trip is exact.
      img.at(y, x) = std::round(v * 65535.0) / 65535.0;
    }
  }
  return img;
}

} // namespace

Dataset generate_synthetic(int n_per_class, int image_size, uint64_t seed,
                           double view_asymmetry) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  if (image_size < 16) throw ConfigError("image_size must be >= 16");
  if (view_asymmetry < 0.0 || view_asymmetry > 1.0) {
    throw ConfigError("view_asymmetry must lie in [0,1]");
  }

  Dataset ds;
  ds.samples.reserve(static_cast<size_t>(n_per_class) * kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng rng(mix_seed(seed, static_cast<uint64_t>(c) * 1000003ULL + i));
      Sample s;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "c%d-%04d", c, i);
      s.id = buf;
      s.label = c;
      // Class 1 is clearest laterally, class 2 frontally; class 0 symmetric.
      const double frontal_distinct = (c == 1) ? 1.0 - view_asymmetry : 1.0;
      const double lateral_distinct = (c == 2) ? 1.0 - view_asymmetry : 1.0;
      s.frontal = render_view(c, frontal_distinct, image_size, rng);
      s.lateral = render_view(c, lateral_distinct, image_size, rng);
      ds.samples.push_back(std::move(s));
    }
  }
  ds.recount();
  return ds;
}

} // namespace mvcl
