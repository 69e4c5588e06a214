#include "mvcl/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

#include "mvcl/common.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

namespace {

using Map = Eigen::Map<Eigen::MatrixXd>;
using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_4d(const Tensor& x, const char* who) {
  if (x.ndim() != 4) {
    throw NumericError(std::string(who) + " expects a (B,C,H,W) tensor, got " +
                       Tensor::shape_string(x.shape()));
  }
}

// Column p = y*W + x holds the 3x3 patch around (y,x) across channels, rows
// ordered (c,ky,kx). Zero padding of one pixel on each border.
void im2col(const double* x, int ch, int h, int w, double* cols) {
  const int k = ch * 9;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double* col = cols + static_cast<int64_t>(y * w + xx) * k;
      for (int c = 0; c < ch; ++c) {
        const double* plane = x + static_cast<int64_t>(c) * h * w;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            *col++ = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                         ? plane[static_cast<int64_t>(sy) * w + sx]
                         : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int ch, int h, int w, double* dx) {
  const int k = ch * 9;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double* col = cols + static_cast<int64_t>(y * w + xx) * k;
      for (int c = 0; c < ch; ++c) {
        double* plane = dx + static_cast<int64_t>(c) * h * w;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx, ++col) {
            const int sx = xx + kx - 1;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
              plane[static_cast<int64_t>(sy) * w + sx] += *col;
            }
          }
        }
      }
    }
  }
}

} // namespace

Conv2d::Conv2d(int in_channels, int out_channels)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      weight_({out_channels, static_cast<int64_t>(in_channels) * 9}),
      bias_({out_channels}),
      grad_weight_({out_channels, static_cast<int64_t>(in_channels) * 9}),
      grad_bias_({out_channels}) {}

Tensor Conv2d::forward(const Tensor& x, bool cache) {
  check_4d(x, "Conv2d");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c != in_channels_) {
    throw NumericError("Conv2d expected " + std::to_string(in_channels_) +
                       " input channels, got " + std::to_string(c));
  }
  const int64_t hw = h * w;
  const int64_t k = in_channels_ * 9;
  Tensor y({b, out_channels_, h, w});
  cols_.resize(static_cast<size_t>(k * hw));
  // weight_ is (out,k) row-major; viewed column-major it is W^T with shape (k,out).
  ConstMap w_t(weight_.data(), k, out_channels_);
  ConstVecMap bias(bias_.data(), out_channels_);
  for (int64_t i = 0; i < b; ++i) {
    im2col(x.data() + i * c * hw, in_channels_, static_cast<int>(h), static_cast<int>(w),
           cols_.data());
    ConstMap cols(cols_.data(), k, hw);
    // Output block (out,hw) row-major == (hw,out) column-major.
    Map out(y.data() + i * out_channels_ * hw, hw, out_channels_);
    out.noalias() = cols.transpose() * w_t;
    out.rowwise() += bias.transpose();
  }
  if (cache) input_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t hw = h * w;
  const int64_t k = in_channels_ * 9;
  Tensor dx({b, c, h, w});
  Map gw_t(grad_weight_.data(), k, out_channels_);
  VecMap gb(grad_bias_.data(), out_channels_);
  ConstMap w_t(weight_.data(), k, out_channels_);
  std::vector<double> dcols(static_cast<size_t>(k * hw));
  for (int64_t i = 0; i < b; ++i) {
    im2col(x.data() + i * c * hw, in_channels_, static_cast<int>(h), static_cast<int>(w),
           cols_.data());
    ConstMap cols(cols_.data(), k, hw);
    ConstMap gy(grad_out.data() + i * out_channels_ * hw, hw, out_channels_);
    gw_t.noalias() += cols * gy;
    gb.noalias() += gy.colwise().sum().transpose();
    Map dc(dcols.data(), k, hw);
    dc.noalias() = w_t * gy.transpose();
    col2im_add(dcols.data(), in_channels_, static_cast<int>(h), static_cast<int>(w),
               dx.data() + i * c * hw);
  }
  return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &grad_weight_});
  out.push_back({prefix + ".bias", &bias_, &grad_bias_});
}

void Conv2d::init_params(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels_) * 9.0);
  for (int64_t i = 0; i < weight_.size(); ++i) weight_[i] = rng.uniform(-bound, bound);
  bias_.fill(0.0);
}

Tensor ReLU::forward(const Tensor& x, bool cache) {
  Tensor y = x;
  if (cache) mask_.assign(static_cast<size_t>(x.size()), 0);
  for (int64_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) {
      if (cache) mask_[static_cast<size_t>(i)] = 1;
    } else {
      y[i] = 0.0;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  for (int64_t i = 0; i < dx.size(); ++i) {
    if (!mask_[static_cast<size_t>(i)]) dx[i] = 0.0;
  }
  return dx;
}

Tensor MaxPool2::forward(const Tensor& x, bool cache) {
  check_4d(x, "MaxPool2");
  const int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) {
    throw NumericError("MaxPool2 requires even spatial dims, got " +
                       Tensor::shape_string(x.shape()));
  }
  const int64_t oh = h / 2, ow = w / 2;
  Tensor y({b, c, oh, ow});
  if (cache) {
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    input_shape_ = x.shape();
  }
  int64_t o = 0;
  for (int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = x.data() + bc * h * w;
    for (int64_t py = 0; py < oh; ++py) {
      for (int64_t px = 0; px < ow; ++px, ++o) {
        int64_t best = (2 * py) * w + 2 * px;
        double best_v = plane[best];
        for (int ky = 0; ky < 2; ++ky) {
          for (int kx = 0; kx < 2; ++kx) {
            const int64_t idx = (2 * py + ky) * w + 2 * px + kx;
            if (plane[idx] > best_v) {
              best_v = plane[idx];
              best = idx;
            }
          }
        }
        y[o] = best_v;
        if (cache) argmax_[static_cast<size_t>(o)] = bc * h * w + best;
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
  Tensor dx(input_shape_);
  for (int64_t o = 0; o < grad_out.size(); ++o) {
    dx[argmax_[static_cast<size_t>(o)]] += grad_out[o];
  }
  return dx;
}

Tensor Flatten::forward(const Tensor& x, bool cache) {
  if (cache) input_shape_ = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& grad_out) {
  return grad_out.reshaped(input_shape_);
}

Dense::Dense(int in_features, int out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}),
      grad_weight_({out_features, in_features}),
      grad_bias_({out_features}) {}

Tensor Dense::forward(const Tensor& x, bool cache) {
  if (x.ndim() != 2 || x.dim(1) != in_features_) {
    throw NumericError("Dense expected (B," + std::to_string(in_features_) + "), got " +
                       Tensor::shape_string(x.shape()));
  }
  const int64_t b = x.dim(0);
  Tensor y({b, out_features_});
  ConstMap xm(x.data(), in_features_, b);        // (in,B): row-major (B,in) transposed
  ConstMap w_t(weight_.data(), in_features_, out_features_);
  Map ym(y.data(), out_features_, b);            // (out,B)
  ym.noalias() = w_t.transpose() * xm;
  ym.colwise() += ConstVecMap(bias_.data(), out_features_);
  if (cache) input_ = x;
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  const int64_t b = input_.dim(0);
  Tensor dx({b, in_features_});
  ConstMap xm(input_.data(), in_features_, b);
  ConstMap gym(grad_out.data(), out_features_, b);
  Map gw_t(grad_weight_.data(), in_features_, out_features_);
  gw_t.noalias() += xm * gym.transpose();
  VecMap(grad_bias_.data(), out_features_).noalias() += gym.rowwise().sum();
  Map dxm(dx.data(), in_features_, b);
  ConstMap w_t(weight_.data(), in_features_, out_features_);
  dxm.noalias() = w_t * gym;
  return dx;
}

void Dense::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &grad_weight_});
  out.push_back({prefix + ".bias", &bias_, &grad_bias_});
}

void Dense::init_params(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  for (int64_t i = 0; i < weight_.size(); ++i) weight_[i] = rng.uniform(-bound, bound);
  bias_.fill(0.0);
}

Tensor Sequential::forward(const Tensor& x, bool cache) {
  Tensor cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur, cache);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  int index = 0;
  for (auto& layer : layers_) {
    if (layer->has_params()) {
      layer->collect_params(prefix + "." + std::to_string(index), out);
      ++index;
    }
  }
}

void Sequential::init_params(Rng& rng) {
  for (auto& layer : layers_) layer->init_params(rng);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check_4d(a, "concat_channels");
  check_4d(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw NumericError("concat_channels mismatch: " + Tensor::shape_string(a.shape()) +
                       " vs " + Tensor::shape_string(b.shape()));
  }
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (ca + cb) * hw, a.data() + i * ca * hw,
                static_cast<size_t>(ca * hw) * sizeof(double));
    std::memcpy(out.data() + i * (ca + cb) * hw + ca * hw, b.data() + i * cb * hw,
                static_cast<size_t>(cb * hw) * sizeof(double));
  }
  return out;
}

void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b) {
  const int64_t n = grad.dim(0), c = grad.dim(1), hw = grad.dim(2) * grad.dim(3);
  const int64_t ca = channels_a, cb = c - channels_a;
  grad_a = Tensor({n, ca, grad.dim(2), grad.dim(3)});
  grad_b = Tensor({n, cb, grad.dim(2), grad.dim(3)});
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(grad_a.data() + i * ca * hw, grad.data() + i * c * hw,
                static_cast<size_t>(ca * hw) * sizeof(double));
    std::memcpy(grad_b.data() + i * cb * hw, grad.data() + i * c * hw + ca * hw,
                static_cast<size_t>(cb * hw) * sizeof(double));
  }
}

} // namespace mvcl
