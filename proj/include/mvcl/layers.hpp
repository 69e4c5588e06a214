#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mvcl/tensor.hpp"

namespace mvcl {

class Rng;

// Named view of one trainable tensor and its gradient. Names follow the
// checkpoint convention `<branch>.<group>.<index>.<weight|bias>` and are the
// transfer-mapping contract.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

class Layer {
public:
  virtual ~Layer() = default;

  // `cache` retains whatever backward() needs; evaluation passes false.
  virtual Tensor forward(const Tensor& x, bool cache) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual bool has_params() const { return false; }
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void init_params(Rng&) {}
};

// 3x3 convolution, stride 1, zero padding 1 (spatial size preserved).
class Conv2d : public Layer {
public:
  Conv2d(int in_channels, int out_channels);

  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& grad_out) override;

  bool has_params() const override { return true; }
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void init_params(Rng& rng) override; // fan-in-scaled uniform, zero bias

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

private:
  int in_channels_, out_channels_;
  Tensor weight_;      // (out, in*9)
  Tensor bias_;        // (out)
  Tensor grad_weight_;
  Tensor grad_bias_;
  Tensor input_;       // cached for backward
  std::vector<double> cols_; // im2col scratch, reused across samples
};

class ReLU : public Layer {
public:
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  std::vector<uint8_t> mask_;
};

// 2x2 max pooling, stride 2. Ties resolve to the first element in scan order.
class MaxPool2 : public Layer {
public:
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  std::vector<int64_t> argmax_;
  std::vector<int64_t> input_shape_;
};

class Flatten : public Layer {
public:
  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  std::vector<int64_t> input_shape_;
};

// Fully connected layer.
class Dense : public Layer {
public:
  Dense(int in_features, int out_features);

  Tensor forward(const Tensor& x, bool cache) override;
  Tensor backward(const Tensor& grad_out) override;

  bool has_params() const override { return true; }
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void init_params(Rng& rng) override;

  int in_features() const { return in_features_; }
  int out_features() const { return out_features_; }

private:
  int in_features_, out_features_;
  Tensor weight_; // (out, in)
  Tensor bias_;   // (out)
  Tensor grad_weight_;
  Tensor grad_bias_;
  Tensor input_;
};

// Layer pipeline. Parameterized layers are numbered 0,1,... within the
// sequence (activation/pool/flatten layers do not consume an index), so the
// first convolution of a feature stack is `<prefix>.0`.
class Sequential {
public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& grad_out);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void init_params(Rng& rng);

  size_t size() const { return layers_.size(); }

private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Channel-axis concatenation of two (B,C,H,W) maps and its adjoint.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b);

} // namespace mvcl
