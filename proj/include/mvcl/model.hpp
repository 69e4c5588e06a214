#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvcl/curriculum.hpp" // ViewMode
#include "mvcl/layers.hpp"

namespace mvcl {

enum class View { kFrontal, kLateral };
const char* to_string(View v);
ViewMode to_view_mode(View v);

enum class Branch { kFrontal, kLateral, kMerge };
const char* to_string(Branch b);

// Feature extractor topology shared by the single-view models and the two
// view branches: per stage, `n_convs` 3x3 convolutions (ReLU after each)
// followed by 2x2 max pooling; then a fully connected classifier whose
// final width is the class count. The full VGG16 configuration is
// expressible; the desk-scale default is a reduced instance.
struct BackboneSpec {
  struct Stage {
    int out_channels = 0;
    int n_convs = 1;
  };

  int in_channels = 1;
  int input_size = 64; // square inputs
  std::vector<Stage> stages;
  std::vector<int> classifier; // widths, last one must equal kNumClasses

  void validate() const;
  int feature_channels() const { return stages.back().out_channels; }
  int feature_spatial() const { return input_size >> static_cast<int>(stages.size()); }
  int feature_dim() const { return feature_channels() * feature_spatial() * feature_spatial(); }

  static BackboneSpec desk_default(int input_size = 64);
  static BackboneSpec vgg16(int input_size = 224);
};

// Adds the merge branch: two 3x3 convolutions over the channel-concatenated
// view features (each followed by 2x2 max pooling) and its own classifier.
struct MultiviewSpec {
  BackboneSpec branch;
  int merge_channels = 64;
  std::vector<int> merge_classifier;

  void validate() const;
  int merge_input_channels() const { return 2 * branch.feature_channels(); }
  int merge_feature_dim() const {
    const int s = branch.feature_spatial() / 4;
    return merge_channels * s * s;
  }

  static MultiviewSpec desk_default(int input_size = 64);
  static MultiviewSpec vgg16();
};

// Logit vectors for whichever branches ran. Each tensor is (B, 3).
struct BranchLogits {
  std::optional<Tensor> frontal;
  std::optional<Tensor> lateral;
  std::optional<Tensor> merge;
};

struct Prediction {
  std::optional<std::array<double, 3>> frontal_probs;
  std::optional<std::array<double, 3>> lateral_probs;
  std::optional<std::array<double, 3>> merge_probs;
  int final_label = -1;
  Branch source_branch = Branch::kMerge;
};

class SingleViewModel {
public:
  SingleViewModel(const BackboneSpec& spec, View view, uint64_t init_seed);

  const BackboneSpec& spec() const { return spec_; }
  View view() const { return view_; }

  // (B,1,H,W) -> (B,3)
  Tensor forward(const Tensor& images, bool cache = false);
  void backward(const Tensor& grad_logits);

  std::vector<ParamRef> params();
  void zero_grads();

private:
  BackboneSpec spec_;
  View view_;
  Sequential features_;
  Sequential classifier_;
};

class MultiviewModel {
public:
  MultiviewModel(const MultiviewSpec& spec, uint64_t init_seed);

  const MultiviewSpec& spec() const { return spec_; }

  // Runs whichever branches the supplied views allow: frontal logits iff
  // `frontal`, lateral iff `lateral`, merge iff both. Throws ConfigError when
  // no view is supplied and DataError on image/spec size mismatch.
  BranchLogits forward(const Tensor* frontal, const Tensor* lateral, bool cache = false);

  // Joint backward over the three per-branch logit gradients; forward must
  // have run with cache=true on both views.
  void backward(const Tensor& grad_frontal, const Tensor& grad_lateral,
                const Tensor& grad_merge);

  std::vector<ParamRef> params();
  void zero_grads();

private:
  MultiviewSpec spec_;
  Sequential frontal_features_, frontal_classifier_;
  Sequential lateral_features_, lateral_classifier_;
  Sequential merge_features_, merge_classifier_;
};

// Merge probabilities decide when both views are present; otherwise the
// supplied view's branch does. Argmax ties go to the lowest class index.
Prediction predict(MultiviewModel& model, const Image* frontal, const Image* lateral);
Prediction predict(SingleViewModel& model, const Image& image);

// Row-wise stable softmax of (B,C) logits.
Tensor softmax_rows(const Tensor& logits);

// Mean cross-entropy of softmax(logits) against integer labels.
double cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels);

// d(mean CE)/d(logits) = (softmax - onehot) / B.
Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels);

// Sum of the three branch cross-entropies (training contract: all branches
// present, i.e. paired views). Throws ConfigError when a branch is missing.
double joint_loss(const BranchLogits& logits, const std::vector<int>& labels);

double single_view_loss(const Tensor& logits, const std::vector<int>& labels);

int argmax_lowest(const double* probs, int n);

// Packs dataset images into a (B,1,H,W) batch tensor.
Tensor pack_images(const std::vector<const Image*>& images);

} // namespace mvcl
