#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubbledyn::nn {

template <class R>
struct Tensor {
  std::vector<int> shape;  // leading dim is the batch
  std::vector<R> d;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    d.assign(count(), R(0));
  }
  size_t count() const {
    size_t n = 1;
    for (int s : shape) n *= size_t(s);
    return n;
  }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  size_t per_sample() const { return batch() ? count() / batch() : 0; }
};

template <class R>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<R> w, g;

  void resize(std::string n, std::vector<int> s) {
    name = std::move(n);
    shape = std::move(s);
    size_t c = 1;
    for (int v : shape) c *= size_t(v);
    w.assign(c, R(0));
    g.assign(c, R(0));
  }
  void zero_grad() { std::fill(g.begin(), g.end(), R(0)); }
};

template <class R>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<R> forward(const Tensor<R>& x, bool train) = 0;
  virtual Tensor<R> backward(const Tensor<R>& gy) = 0;
  virtual std::vector<Param<R>*> params() { return {}; }
  virtual std::string kind() const = 0;
};

template <class R>
class Dense : public Layer<R> {
 public:
  Dense(int in, int out, std::mt19937_64& rng) : in_(in), out_(out) {
    w_.resize("w", {out, in});
    b_.resize("b", {out});
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / in));
    for (auto& v : w_.w) v = R(nd(rng));
  }
  Tensor<R> forward(const Tensor<R>& x, bool) override {
    int n = x.batch();
    if (x.per_sample() != size_t(in_))
      throw std::runtime_error("Dense: input dim mismatch");
    x_ = x;
    Tensor<R> y({n, out_});
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) {
        R acc = b_.w[o];
        const R* xi = &x.d[size_t(i) * in_];
        const R* wo = &w_.w[size_t(o) * in_];
        for (int k = 0; k < in_; ++k) acc += wo[k] * xi[k];
        y.d[size_t(i) * out_ + o] = acc;
      }
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    int n = x_.batch();
    Tensor<R> gx(x_.shape);
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out_; ++o) {
        R g = gy.d[size_t(i) * out_ + o];
        b_.g[o] += g;
        const R* xi = &x_.d[size_t(i) * in_];
        R* wg = &w_.g[size_t(o) * in_];
        const R* wo = &w_.w[size_t(o) * in_];
        R* gxi = &gx.d[size_t(i) * in_];
        for (int k = 0; k < in_; ++k) {
          wg[k] += g * xi[k];
          gxi[k] += g * wo[k];
        }
      }
    return gx;
  }
  std::vector<Param<R>*> params() override { return {&w_, &b_}; }
  std::string kind() const override { return "dense"; }

 private:
  int in_, out_;
  Param<R> w_, b_;
  Tensor<R> x_;
};

// Valid convolution, stride 1, square kernel.
template <class R>
class Conv2d : public Layer<R> {
 public:
  Conv2d(int cin, int cout, int k, std::mt19937_64& rng)
      : cin_(cin), cout_(cout), k_(k) {
    w_.resize("w", {cout, cin, k, k});
    b_.resize("b", {cout});
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (cin * k * k)));
    for (auto& v : w_.w) v = R(nd(rng));
  }
  Tensor<R> forward(const Tensor<R>& x, bool) override {
    x_ = x;
    int n = x.shape[0], h = x.shape[2], w = x.shape[3];
    int oh = h - k_ + 1, ow = w - k_ + 1;
    Tensor<R> y({n, cout_, oh, ow});
    for (int i = 0; i < n; ++i)
      for (int co = 0; co < cout_; ++co)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            R acc = b_.w[co];
            for (int ci = 0; ci < cin_; ++ci)
              for (int ky = 0; ky < k_; ++ky) {
                const R* row = &x.d[((size_t(i) * cin_ + ci) * h + oy + ky) * w + ox];
                const R* wr = &w_.w[((size_t(co) * cin_ + ci) * k_ + ky) * k_];
                for (int kx = 0; kx < k_; ++kx) acc += wr[kx] * row[kx];
              }
            y.d[((size_t(i) * cout_ + co) * oh + oy) * ow + ox] = acc;
          }
    oh_ = oh;
    ow_ = ow;
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    int n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
    Tensor<R> gx(x_.shape);
    for (int i = 0; i < n; ++i)
      for (int co = 0; co < cout_; ++co)
        for (int oy = 0; oy < oh_; ++oy)
          for (int ox = 0; ox < ow_; ++ox) {
            R g = gy.d[((size_t(i) * cout_ + co) * oh_ + oy) * ow_ + ox];
            b_.g[co] += g;
            for (int ci = 0; ci < cin_; ++ci)
              for (int ky = 0; ky < k_; ++ky) {
                const R* xrow = &x_.d[((size_t(i) * cin_ + ci) * h + oy + ky) * w + ox];
                R* grow = &gx.d[((size_t(i) * cin_ + ci) * h + oy + ky) * w + ox];
                R* wg = &w_.g[((size_t(co) * cin_ + ci) * k_ + ky) * k_];
                const R* wr = &w_.w[((size_t(co) * cin_ + ci) * k_ + ky) * k_];
                for (int kx = 0; kx < k_; ++kx) {
                  wg[kx] += g * xrow[kx];
                  grow[kx] += g * wr[kx];
                }
              }
          }
    return gx;
  }
  std::vector<Param<R>*> params() override { return {&w_, &b_}; }
  std::string kind() const override { return "conv2d"; }

 private:
  int cin_, cout_, k_, oh_ = 0, ow_ = 0;
  Param<R> w_, b_;
  Tensor<R> x_;
};

// Transposed convolution, stride 1: output spatial size grows by k - 1.
template <class R>
class Deconv2d : public Layer<R> {
 public:
  Deconv2d(int cin, int cout, int k, std::mt19937_64& rng)
      : cin_(cin), cout_(cout), k_(k) {
    w_.resize("w", {cin, cout, k, k});
    b_.resize("b", {cout});
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (cin * k * k)));
    for (auto& v : w_.w) v = R(nd(rng));
  }
  Tensor<R> forward(const Tensor<R>& x, bool) override {
    x_ = x;
    int n = x.shape[0], h = x.shape[2], w = x.shape[3];
    int oh = h + k_ - 1, ow = w + k_ - 1;
    Tensor<R> y({n, cout_, oh, ow});
    for (int i = 0; i < n; ++i)
      for (int co = 0; co < cout_; ++co)
        for (size_t j = 0; j < size_t(oh) * ow; ++j)
          y.d[(size_t(i) * cout_ + co) * oh * ow + j] = b_.w[co];
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < cin_; ++ci)
        for (int iy = 0; iy < h; ++iy)
          for (int ix = 0; ix < w; ++ix) {
            R xv = x.d[((size_t(i) * cin_ + ci) * h + iy) * w + ix];
            for (int co = 0; co < cout_; ++co)
              for (int ky = 0; ky < k_; ++ky) {
                R* yrow = &y.d[((size_t(i) * cout_ + co) * oh + iy + ky) * ow + ix];
                const R* wr = &w_.w[((size_t(ci) * cout_ + co) * k_ + ky) * k_];
                for (int kx = 0; kx < k_; ++kx) yrow[kx] += xv * wr[kx];
              }
          }
    oh_ = oh;
    ow_ = ow;
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    int n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
    Tensor<R> gx(x_.shape);
    for (int i = 0; i < n; ++i)
      for (int co = 0; co < cout_; ++co)
        for (size_t j = 0; j < size_t(oh_) * ow_; ++j)
          b_.g[co] += gy.d[(size_t(i) * cout_ + co) * oh_ * ow_ + j];
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < cin_; ++ci)
        for (int iy = 0; iy < h; ++iy)
          for (int ix = 0; ix < w; ++ix) {
            R xv = x_.d[((size_t(i) * cin_ + ci) * h + iy) * w + ix];
            R acc = R(0);
            for (int co = 0; co < cout_; ++co)
              for (int ky = 0; ky < k_; ++ky) {
                const R* grow = &gy.d[((size_t(i) * cout_ + co) * oh_ + iy + ky) * ow_ + ix];
                const R* wr = &w_.w[((size_t(ci) * cout_ + co) * k_ + ky) * k_];
                R* wg = &w_.g[((size_t(ci) * cout_ + co) * k_ + ky) * k_];
                for (int kx = 0; kx < k_; ++kx) {
                  acc += grow[kx] * wr[kx];
                  wg[kx] += grow[kx] * xv;
                }
              }
            gx.d[((size_t(i) * cin_ + ci) * h + iy) * w + ix] = acc;
          }
    return gx;
  }
  std::vector<Param<R>*> params() override { return {&w_, &b_}; }
  std::string kind() const override { return "deconv2d"; }

 private:
  int cin_, cout_, k_, oh_ = 0, ow_ = 0;
  Param<R> w_, b_;
  Tensor<R> x_;
};

template <class R>
class ReLU : public Layer<R> {
 public:
  Tensor<R> forward(const Tensor<R>& x, bool) override {
    mask_.assign(x.d.size(), 0);
    Tensor<R> y = x;
    min_margin_ = R(1e30);
    for (size_t i = 0; i < y.d.size(); ++i) {
      min_margin_ = std::min(min_margin_, std::abs(y.d[i]));
      if (y.d[i] > R(0))
        mask_[i] = 1;
      else
        y.d[i] = R(0);
    }
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    Tensor<R> gx = gy;
    for (size_t i = 0; i < gx.d.size(); ++i)
      if (!mask_[i]) gx.d[i] = R(0);
    return gx;
  }
  std::string kind() const override { return "relu"; }
  // Distance of the closest pre-activation to the kink, from the last forward.
  R min_margin() const { return min_margin_; }

 private:
  std::vector<uint8_t> mask_;
  R min_margin_ = R(0);
};

// Batch normalization over the batch (and spatial dims when the input is
// 4-D). eps 1e-5, running-stat momentum 0.1; inference uses running stats.
template <class R>
class BatchNorm : public Layer<R> {
 public:
  explicit BatchNorm(int channels) : c_(channels) {
    gamma_.resize("gamma", {channels});
    beta_.resize("beta", {channels});
    std::fill(gamma_.w.begin(), gamma_.w.end(), R(1));
    run_mean_.assign(channels, R(0));
    run_var_.assign(channels, R(1));
  }
  Tensor<R> forward(const Tensor<R>& x, bool train) override {
    shape_ = x.shape;
    int n = x.shape[0];
    spatial_ = x.shape.size() == 4 ? x.shape[2] * x.shape[3] : 1;
    if (x.per_sample() != size_t(c_) * spatial_)
      throw std::runtime_error("BatchNorm: channel mismatch");
    size_t m = size_t(n) * spatial_;
    mean_.assign(c_, R(0));
    var_.assign(c_, R(0));
    if (train) {
      for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c_; ++ch)
          for (int s = 0; s < spatial_; ++s)
            mean_[ch] += x.d[(size_t(i) * c_ + ch) * spatial_ + s];
      for (int ch = 0; ch < c_; ++ch) mean_[ch] /= R(m);
      for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c_; ++ch)
          for (int s = 0; s < spatial_; ++s) {
            R d = x.d[(size_t(i) * c_ + ch) * spatial_ + s] - mean_[ch];
            var_[ch] += d * d;
          }
      for (int ch = 0; ch < c_; ++ch) var_[ch] /= R(m);
      for (int ch = 0; ch < c_; ++ch) {
        run_mean_[ch] = R(0.9) * run_mean_[ch] + R(0.1) * mean_[ch];
        run_var_[ch] = R(0.9) * run_var_[ch] + R(0.1) * var_[ch];
      }
    } else {
      mean_ = run_mean_;
      var_ = run_var_;
    }
    inv_std_.resize(c_);
    for (int ch = 0; ch < c_; ++ch)
      inv_std_[ch] = R(1) / std::sqrt(var_[ch] + R(1e-5));
    xhat_ = Tensor<R>(x.shape);
    Tensor<R> y(x.shape);
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c_; ++ch)
        for (int s = 0; s < spatial_; ++s) {
          size_t idx = (size_t(i) * c_ + ch) * spatial_ + s;
          R xh = (x.d[idx] - mean_[ch]) * inv_std_[ch];
          xhat_.d[idx] = xh;
          y.d[idx] = gamma_.w[ch] * xh + beta_.w[ch];
        }
    train_ = train;
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    int n = shape_[0];
    size_t m = size_t(n) * spatial_;
    Tensor<R> gx(shape_);
    std::vector<R> sum_gy(c_, R(0)), sum_gy_xhat(c_, R(0));
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c_; ++ch)
        for (int s = 0; s < spatial_; ++s) {
          size_t idx = (size_t(i) * c_ + ch) * spatial_ + s;
          sum_gy[ch] += gy.d[idx];
          sum_gy_xhat[ch] += gy.d[idx] * xhat_.d[idx];
        }
    for (int ch = 0; ch < c_; ++ch) {
      gamma_.g[ch] += sum_gy_xhat[ch];
      beta_.g[ch] += sum_gy[ch];
    }
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c_; ++ch)
        for (int s = 0; s < spatial_; ++s) {
          size_t idx = (size_t(i) * c_ + ch) * spatial_ + s;
          if (train_) {
            gx.d[idx] = gamma_.w[ch] * inv_std_[ch] *
                        (gy.d[idx] - sum_gy[ch] / R(m) -
                         xhat_.d[idx] * sum_gy_xhat[ch] / R(m));
          } else {
            gx.d[idx] = gamma_.w[ch] * inv_std_[ch] * gy.d[idx];
          }
        }
    return gx;
  }
  std::vector<Param<R>*> params() override { return {&gamma_, &beta_}; }
  std::string kind() const override { return "batchnorm"; }

  std::vector<R>& running_mean() { return run_mean_; }
  std::vector<R>& running_var() { return run_var_; }

 private:
  int c_, spatial_ = 1;
  bool train_ = true;
  std::vector<int> shape_;
  Param<R> gamma_, beta_;
  std::vector<R> run_mean_, run_var_, mean_, var_, inv_std_;
  Tensor<R> xhat_;
};

template <class R>
class Reshape : public Layer<R> {
 public:
  explicit Reshape(std::vector<int> per_sample) : per_sample_(std::move(per_sample)) {}
  Tensor<R> forward(const Tensor<R>& x, bool) override {
    in_shape_ = x.shape;
    Tensor<R> y;
    y.shape = {x.batch()};
    y.shape.insert(y.shape.end(), per_sample_.begin(), per_sample_.end());
    if (Tensor<R>(y.shape).count() != x.count())
      throw std::runtime_error("Reshape: element count mismatch");
    y.d = x.d;
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) override {
    Tensor<R> gx;
    gx.shape = in_shape_;
    gx.d = gy.d;
    return gx;
  }
  std::string kind() const override { return "reshape"; }

 private:
  std::vector<int> per_sample_, in_shape_;
};

template <class R>
class Sequential {
 public:
  template <class L, class... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }
  Tensor<R> forward(const Tensor<R>& x, bool train) {
    Tensor<R> y = x;
    for (auto& l : layers_) y = l->forward(y, train);
    return y;
  }
  Tensor<R> backward(const Tensor<R>& gy) {
    Tensor<R> g = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      g = (*it)->backward(g);
    return g;
  }
  std::vector<Param<R>*> params() {
    std::vector<Param<R>*> ps;
    for (auto& l : layers_)
      for (auto* p : l->params()) ps.push_back(p);
    return ps;
  }
  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }
  // Smallest |pre-activation| over all ReLU layers in the last forward.
  R min_relu_margin() const {
    R m = R(1e30);
    for (const auto& l : layers_)
      if (auto* r = dynamic_cast<const ReLU<R>*>(l.get()))
        m = std::min(m, r->min_margin());
    return m;
  }
  std::vector<Layer<R>*> layers() {
    std::vector<Layer<R>*> out;
    for (auto& l : layers_) out.push_back(l.get());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<R>>> layers_;
};

// Adaptive moment estimation.
template <class R>
class Adam {
 public:
  Adam(std::vector<Param<R>*> params, double lr = 1e-3, double b1 = 0.9,
       double b2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->w.size(), R(0));
      v_.emplace_back(p->w.size(), R(0));
    }
  }
  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, t_), bc2 = 1.0 - std::pow(b2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      for (size_t k = 0; k < p.w.size(); ++k) {
        R g = p.g[k];
        m_[i][k] = R(b1_) * m_[i][k] + R(1.0 - b1_) * g;
        v_[i][k] = R(b2_) * v_[i][k] + R(1.0 - b2_) * g * g;
        R mh = m_[i][k] / R(bc1), vh = v_[i][k] / R(bc2);
        p.w[k] -= R(lr_) * mh / (std::sqrt(vh) + R(eps_));
      }
    }
  }

 private:
  std::vector<Param<R>*> params_;
  std::vector<std::vector<R>> m_, v_;
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
};

}  // namespace bubbledyn::nn
