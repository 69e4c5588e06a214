#include "mvcl/model.hpp"

#include <algorithm>
#include <cmath>

#include "mvcl/common.hpp"
#include "mvcl/image.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

const char* to_string(View v) { return v == View::kFrontal ? "frontal" : "lateral"; }

ViewMode to_view_mode(View v) {
  return v == View::kFrontal ? ViewMode::kFrontalOnly : ViewMode::kLateralOnly;
}

const char* to_string(Branch b) {
  switch (b) {
    case Branch::kFrontal: return "frontal";
    case Branch::kLateral: return "lateral";
    case Branch::kMerge: return "merge";
  }
  return "?";
}

void BackboneSpec::validate() const {
  if (stages.empty()) throw ConfigError("backbone needs at least one stage");
  for (const Stage& s : stages) {
    if (s.out_channels < 1 || s.n_convs < 1) {
      throw ConfigError("backbone stage needs positive channels and conv count");
    }
  }
  if (in_channels < 1) throw ConfigError("backbone in_channels must be >= 1");
  if (input_size < 1) throw ConfigError("backbone input_size must be >= 1");
  if ((input_size >> stages.size()) << stages.size() != input_size || feature_spatial() < 1) {
    throw ConfigError("input size " + std::to_string(input_size) + " does not survive " +
                      std::to_string(stages.size()) + " pooling stages");
  }
  if (classifier.empty() || classifier.back() != kNumClasses) {
    throw ConfigError("classifier widths must end in the class count (" +
                      std::to_string(kNumClasses) + ")");
  }
}

BackboneSpec BackboneSpec::desk_default(int input_size) {
  BackboneSpec spec;
  spec.input_size = input_size;
  spec.stages = {{16, 1}, {32, 1}, {64, 1}};
  spec.classifier = {128, kNumClasses};
  return spec;
}

BackboneSpec BackboneSpec::vgg16(int input_size) {
  BackboneSpec spec;
  spec.input_size = input_size;
  spec.stages = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  spec.classifier = {4096, 4096, kNumClasses};
  return spec;
}

void MultiviewSpec::validate() const {
  branch.validate();
  if (merge_channels < 1) throw ConfigError("merge_channels must be >= 1");
  const int s = branch.feature_spatial();
  if (s % 4 != 0 || s / 4 < 1) {
    throw ConfigError("merge branch needs the view feature maps to survive two more "
                      "pooling stages; got spatial size " + std::to_string(s));
  }
  if (merge_classifier.empty() || merge_classifier.back() != kNumClasses) {
    throw ConfigError("merge classifier widths must end in the class count (" +
                      std::to_string(kNumClasses) + ")");
  }
}

MultiviewSpec MultiviewSpec::desk_default(int input_size) {
  MultiviewSpec spec;
  spec.branch = BackboneSpec::desk_default(input_size);
  spec.merge_channels = 64;
  spec.merge_classifier = {128, kNumClasses};
  return spec;
}

MultiviewSpec MultiviewSpec::vgg16() {
  MultiviewSpec spec;
  spec.branch = BackboneSpec::vgg16();
  spec.merge_channels = 512;
  spec.merge_classifier = {4096, 4096, kNumClasses};
  return spec;
}

namespace {

Sequential make_features(const BackboneSpec& spec) {
  Sequential seq;
  int ch = spec.in_channels;
  for (const auto& stage : spec.stages) {
    for (int i = 0; i < stage.n_convs; ++i) {
      seq.add(std::make_unique<Conv2d>(ch, stage.out_channels));
      seq.add(std::make_unique<ReLU>());
      ch = stage.out_channels;
    }
    seq.add(std::make_unique<MaxPool2>());
  }
  return seq;
}

Sequential make_classifier(int in_dim, const std::vector<int>& widths) {
  Sequential seq;
  seq.add(std::make_unique<Flatten>());
  int d = in_dim;
  for (size_t i = 0; i < widths.size(); ++i) {
    seq.add(std::make_unique<Dense>(d, widths[i]));
    if (i + 1 < widths.size()) seq.add(std::make_unique<ReLU>());
    d = widths[i];
  }
  return seq;
}

Sequential make_merge_features(const MultiviewSpec& spec) {
  Sequential seq;
  seq.add(std::make_unique<Conv2d>(spec.merge_input_channels(), spec.merge_channels));
  seq.add(std::make_unique<ReLU>());
  seq.add(std::make_unique<MaxPool2>());
  seq.add(std::make_unique<Conv2d>(spec.merge_channels, spec.merge_channels));
  seq.add(std::make_unique<ReLU>());
  seq.add(std::make_unique<MaxPool2>());
  return seq;
}

void check_batch(const Tensor& x, const BackboneSpec& spec, const char* view) {
  if (x.ndim() != 4 || x.dim(1) != spec.in_channels) {
    throw DataError(std::string("bad ") + view + " batch shape " +
                    Tensor::shape_string(x.shape()) + ", expected (B," +
                    std::to_string(spec.in_channels) + "," + std::to_string(spec.input_size) +
                    "," + std::to_string(spec.input_size) + ")");
  }
  if (x.dim(2) != spec.input_size || x.dim(3) != spec.input_size) {
    throw DataError(std::string(view) + " image size " + std::to_string(x.dim(2)) + "x" +
                    std::to_string(x.dim(3)) + " does not match the model's expected " +
                    std::to_string(spec.input_size) + "x" + std::to_string(spec.input_size));
  }
}

} // namespace

SingleViewModel::SingleViewModel(const BackboneSpec& spec, View view, uint64_t init_seed)
    : spec_(spec), view_(view) {
  spec_.validate();
  features_ = make_features(spec_);
  classifier_ = make_classifier(spec_.feature_dim(), spec_.classifier);
  Rng rng_f(mix_seed(init_seed, 1));
  Rng rng_c(mix_seed(init_seed, 2));
  features_.init_params(rng_f);
  classifier_.init_params(rng_c);
}

Tensor SingleViewModel::forward(const Tensor& images, bool cache) {
  check_batch(images, spec_, to_string(view_));
  return classifier_.forward(features_.forward(images, cache), cache);
}

void SingleViewModel::backward(const Tensor& grad_logits) {
  features_.backward(classifier_.backward(grad_logits));
}

std::vector<ParamRef> SingleViewModel::params() {
  std::vector<ParamRef> out;
  const std::string base = to_string(view_);
  features_.collect_params(base + ".features", out);
  classifier_.collect_params(base + ".classifier", out);
  return out;
}

void SingleViewModel::zero_grads() {
  for (ParamRef& p : params()) p.grad->fill(0.0);
}

MultiviewModel::MultiviewModel(const MultiviewSpec& spec, uint64_t init_seed) : spec_(spec) {
  spec_.validate();
  frontal_features_ = make_features(spec_.branch);
  frontal_classifier_ = make_classifier(spec_.branch.feature_dim(), spec_.branch.classifier);
  lateral_features_ = make_features(spec_.branch);
  lateral_classifier_ = make_classifier(spec_.branch.feature_dim(), spec_.branch.classifier);
  merge_features_ = make_merge_features(spec_);
  merge_classifier_ = make_classifier(spec_.merge_feature_dim(), spec_.merge_classifier);
  // Independent init streams per module, so e.g. the two branches never
  // start as clones of each other.
  Rng rngs[6] = {Rng(mix_seed(init_seed, 1)), Rng(mix_seed(init_seed, 2)),
                 Rng(mix_seed(init_seed, 3)), Rng(mix_seed(init_seed, 4)),
                 Rng(mix_seed(init_seed, 5)), Rng(mix_seed(init_seed, 6))};
  frontal_features_.init_params(rngs[0]);
  frontal_classifier_.init_params(rngs[1]);
  lateral_features_.init_params(rngs[2]);
  lateral_classifier_.init_params(rngs[3]);
  merge_features_.init_params(rngs[4]);
  merge_classifier_.init_params(rngs[5]);
}

BranchLogits MultiviewModel::forward(const Tensor* frontal, const Tensor* lateral, bool cache) {
  if (!frontal && !lateral) {
    throw ConfigError("multiview forward needs at least one view");
  }
  BranchLogits out;
  Tensor frontal_maps, lateral_maps;
  if (frontal) {
    check_batch(*frontal, spec_.branch, "frontal");
    frontal_maps = frontal_features_.forward(*frontal, cache);
    out.frontal = frontal_classifier_.forward(frontal_maps, cache);
  }
  if (lateral) {
    check_batch(*lateral, spec_.branch, "lateral");
    lateral_maps = lateral_features_.forward(*lateral, cache);
    out.lateral = lateral_classifier_.forward(lateral_maps, cache);
  }
  if (frontal && lateral) {
    const Tensor merged = concat_channels(frontal_maps, lateral_maps);
    out.merge = merge_classifier_.forward(merge_features_.forward(merged, cache), cache);
  }
  return out;
}

void MultiviewModel::backward(const Tensor& grad_frontal, const Tensor& grad_lateral,
                              const Tensor& grad_merge) {
  const Tensor d_merged = merge_features_.backward(merge_classifier_.backward(grad_merge));
  Tensor d_frontal_maps, d_lateral_maps;
  split_channels(d_merged, spec_.branch.feature_channels(), d_frontal_maps, d_lateral_maps);

  // Each view's feature stack receives its classifier-head gradient plus the
  // merge branch's contribution through the concatenation.
  Tensor d_f = frontal_classifier_.backward(grad_frontal);
  for (int64_t i = 0; i < d_f.size(); ++i) d_f[i] += d_frontal_maps[i];
  frontal_features_.backward(d_f);

  Tensor d_l = lateral_classifier_.backward(grad_lateral);
  for (int64_t i = 0; i < d_l.size(); ++i) d_l[i] += d_lateral_maps[i];
  lateral_features_.backward(d_l);
}

std::vector<ParamRef> MultiviewModel::params() {
  std::vector<ParamRef> out;
  frontal_features_.collect_params("frontal.features", out);
  frontal_classifier_.collect_params("frontal.classifier", out);
  lateral_features_.collect_params("lateral.features", out);
  lateral_classifier_.collect_params("lateral.classifier", out);
  merge_features_.collect_params("merge.features", out);
  merge_classifier_.collect_params("merge.classifier", out);
  return out;
}

void MultiviewModel::zero_grads() {
  for (ParamRef& p : params()) p.grad->fill(0.0);
}

Tensor softmax_rows(const Tensor& logits) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  Tensor p({b, c});
  for (int64_t i = 0; i < b; ++i) {
    const double* z = logits.data() + i * c;
    double zmax = z[0];
    for (int64_t j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(z[j] - zmax);
    for (int64_t j = 0; j < c; ++j) p[i * c + j] = std::exp(z[j] - zmax) / sum;
  }
  return p;
}

double cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != b) {
    throw NumericError("cross entropy: batch/label size mismatch");
  }
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double* z = logits.data() + i * c;
    double zmax = z[0];
    for (int64_t j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(z[j] - zmax);
    total += std::log(sum) + zmax - z[labels[i]];
  }
  return total / static_cast<double>(b);
}

Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t b = logits.dim(0), c = logits.dim(1);
  Tensor g = softmax_rows(logits);
  for (int64_t i = 0; i < b; ++i) {
    g[i * c + labels[i]] -= 1.0;
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  for (int64_t i = 0; i < g.size(); ++i) g[i] *= inv_b;
  return g;
}

double joint_loss(const BranchLogits& logits, const std::vector<int>& labels) {
  if (!logits.frontal || !logits.lateral || !logits.merge) {
    throw ConfigError("joint loss requires all three branches (training uses paired views)");
  }
  return cross_entropy_mean(*logits.frontal, labels) +
         cross_entropy_mean(*logits.lateral, labels) +
         cross_entropy_mean(*logits.merge, labels);
}

double single_view_loss(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy_mean(logits, labels);
}

int argmax_lowest(const double* probs, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

Tensor pack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw DataError("cannot pack an empty image batch");
  const int h = images[0]->height, w = images[0]->width;
  Tensor batch({static_cast<int64_t>(images.size()), 1, h, w});
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) {
      throw DataError("image batch mixes sizes");
    }
    std::copy(images[i]->pixels.begin(), images[i]->pixels.end(),
              batch.data() + static_cast<int64_t>(i) * h * w);
  }
  return batch;
}

namespace {

std::array<double, 3> probs_of(const Tensor& logits) {
  const Tensor p = softmax_rows(logits);
  return {p[0], p[1], p[2]};
}

} // namespace

Prediction predict(MultiviewModel& model, const Image* frontal, const Image* lateral) {
  const Tensor fb = frontal ? pack_images({frontal}) : Tensor();
  const Tensor lb = lateral ? pack_images({lateral}) : Tensor();
  const BranchLogits logits =
      model.forward(frontal ? &fb : nullptr, lateral ? &lb : nullptr, false);
  Prediction pred;
  if (logits.frontal) pred.frontal_probs = probs_of(*logits.frontal);
  if (logits.lateral) pred.lateral_probs = probs_of(*logits.lateral);
  if (logits.merge) pred.merge_probs = probs_of(*logits.merge);
  const std::array<double, 3>* decisive = nullptr;
  if (pred.merge_probs) {
    decisive = &*pred.merge_probs;
    pred.source_branch = Branch::kMerge;
  } else if (pred.frontal_probs) {
    decisive = &*pred.frontal_probs;
    pred.source_branch = Branch::kFrontal;
  } else {
    decisive = &*pred.lateral_probs;
    pred.source_branch = Branch::kLateral;
  }
  pred.final_label = argmax_lowest(decisive->data(), kNumClasses);
  return pred;
}

Prediction predict(SingleViewModel& model, const Image& image) {
  const Tensor batch = pack_images({&image});
  const Tensor logits = model.forward(batch, false);
  Prediction pred;
  const auto probs = probs_of(logits);
  pred.source_branch = model.view() == View::kFrontal ? Branch::kFrontal : Branch::kLateral;
  if (model.view() == View::kFrontal) {
    pred.frontal_probs = probs;
  } else {
    pred.lateral_probs = probs;
  }
  pred.final_label = argmax_lowest(probs.data(), kNumClasses);
  return pred;
}

} // namespace mvcl
