#include "analognas/nn/layers.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "analognas/nn/linalg.hpp"

namespace analognas::nn {

template <typename T>
void im2col(const Tensor4<T>& x, const ConvGeometry& g, std::vector<T>& cols) {
  const int n_batch = x.batch(), h = x.height(), w = x.width();
  const int ho = g.out_extent(h), wo = g.out_extent(w);
  const std::size_t ncols = static_cast<std::size_t>(n_batch) * ho * wo;
  cols.resize(static_cast<std::size_t>(g.fan_in()) * ncols);
  const int k = g.kernel;
  for (int ci = 0; ci < g.in_channels; ++ci) {
    const T* plane = x.channel(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * ncols;
        // Output columns whose input column lies inside the image: [ox_lo, ox_hi).
        int ox_lo = 0;
        while (ox_lo < wo && ox_lo * g.stride + kx - g.pad < 0) ++ox_lo;
        int ox_hi = ox_lo;
        while (ox_hi < wo && ox_hi * g.stride + kx - g.pad < w) ++ox_hi;
        for (int n = 0; n < n_batch; ++n) {
          const T* img = plane + static_cast<std::size_t>(n) * h * w;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + wo, T{0});
              dst += wo;
              continue;
            }
            const T* row = img + static_cast<std::size_t>(iy) * w - g.pad + kx;
            int ox = 0;
            for (; ox < ox_lo; ++ox) *dst++ = T{0};
            if (g.stride == 1) {
              std::copy(row + ox_lo, row + ox_hi, dst);
              dst += ox_hi - ox_lo;
              ox = ox_hi;
            } else {
              for (; ox < ox_hi; ++ox) *dst++ = row[ox * g.stride];
            }
            for (; ox < wo; ++ox) *dst++ = T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(std::span<const T> cols, const ConvGeometry& g, Tensor4<T>& dx) {
  const int n_batch = dx.batch(), h = dx.height(), w = dx.width();
  const int ho = g.out_extent(h), wo = g.out_extent(w);
  const std::size_t ncols = static_cast<std::size_t>(n_batch) * ho * wo;
  const int k = g.kernel;
  for (int ci = 0; ci < g.in_channels; ++ci) {
    T* plane = dx.channel(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * ncols;
        for (int n = 0; n < n_batch; ++n) {
          T* img = plane + static_cast<std::size_t>(n) * h * w;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride + ky - g.pad;
            if (iy < 0 || iy >= h) {
              src += wo;
              continue;
            }
            T* row = img + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < wo; ++ox, ++src) {
              const int ix = ox * g.stride + kx - g.pad;
              if (ix >= 0 && ix < w) row[ix] += *src;
            }
          }
        }
      }
    }
  }
}

template <typename T>
void DigitalExecutor<T>::matmul(const ConvUnit<T>& unit, std::span<const T> cols, std::size_t ncols, std::span<T> out) {
  gemm(unit.weight().value.data(), cols.data(), out.data(), static_cast<std::size_t>(unit.rows()),
       static_cast<std::size_t>(unit.fan_in()), ncols);
}

// ---------------------------------------------------------------------------
// Batch norm

template <typename T>
BatchNorm<T>::BatchNorm(int channels, const std::string& name)
    : gamma(name + ".bn.gamma", static_cast<std::size_t>(channels)),
      beta(name + ".bn.beta", static_cast<std::size_t>(channels)),
      running_mean(static_cast<std::size_t>(channels), T{0}),
      running_var(static_cast<std::size_t>(channels), T{1}) {
  std::fill(gamma.value.begin(), gamma.value.end(), T{1});
}

template <typename T>
Tensor4<T> BatchNorm<T>::forward_train(const Tensor4<T>& x) {
  const int channels = x.channels();
  const std::size_t m = x.plane_size();
  Tensor4<T> y(x.batch(), channels, x.height(), x.width());
  xhat_.resize(x.size());
  inv_std_.resize(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    const auto in = x.channel(c);
    double sum = 0.0;
    for (T v : in) sum += v;
    const double mean = sum / static_cast<double>(m);
    double sq = 0.0;
    for (T v : in) sq += (v - mean) * (v - mean);
    const double var = sq / static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    inv_std_[static_cast<std::size_t>(c)] = static_cast<T>(inv);
    const T g = gamma.value[static_cast<std::size_t>(c)], b = beta.value[static_cast<std::size_t>(c)];
    T* xh = xhat_.data() + static_cast<std::size_t>(c) * m;
    auto out = y.channel(c);
    for (std::size_t i = 0; i < m; ++i) {
      xh[i] = static_cast<T>((in[i] - mean) * inv);
      out[i] = g * xh[i] + b;
    }
    const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
    auto& rm = running_mean[static_cast<std::size_t>(c)];
    auto& rv = running_var[static_cast<std::size_t>(c)];
    rm = static_cast<T>((1.0 - kMomentum) * rm + kMomentum * mean);
    rv = static_cast<T>((1.0 - kMomentum) * rv + kMomentum * unbiased);
  }
  return y;
}

template <typename T>
Tensor4<T> BatchNorm<T>::backward(const Tensor4<T>& dy) {
  const int channels = dy.channels();
  const std::size_t m = dy.plane_size();
  Tensor4<T> dx(dy.batch(), channels, dy.height(), dy.width());
  for (int c = 0; c < channels; ++c) {
    const auto g = dy.channel(c);
    const T* xh = xhat_.data() + static_cast<std::size_t>(c) * m;
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_dy += g[i];
      sum_dy_xh += g[i] * xh[i];
    }
    gamma.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xh);
    beta.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
    const double scale = gamma.value[static_cast<std::size_t>(c)] * inv_std_[static_cast<std::size_t>(c)];
    const double mean_dy = sum_dy / static_cast<double>(m), mean_dy_xh = sum_dy_xh / static_cast<double>(m);
    auto out = dx.channel(c);
    for (std::size_t i = 0; i < m; ++i) out[i] = static_cast<T>(scale * (g[i] - mean_dy - xh[i] * mean_dy_xh));
  }
  return dx;
}

template <typename T>
T BatchNorm<T>::eval_scale(int c) const {
  const auto i = static_cast<std::size_t>(c);
  return static_cast<T>(gamma.value[i] / std::sqrt(static_cast<double>(running_var[i]) + kEpsilon));
}

template <typename T>
void BatchNorm<T>::apply_eval(Tensor4<T>& x) const {
  for (int c = 0; c < x.channels(); ++c) {
    const T s = eval_scale(c);
    const T shift = beta.value[static_cast<std::size_t>(c)] - running_mean[static_cast<std::size_t>(c)] * s;
    for (T& v : x.channel(c)) v = v * s + shift;
  }
}

// ---------------------------------------------------------------------------
// Conv unit

template <typename T>
ConvUnit<T>::ConvUnit(ConvGeometry g, bool bias, bool batch_norm, std::string name)
    : geom_(g), name_(std::move(name)), weight_(name_ + ".weight", static_cast<std::size_t>(g.out_channels) * g.fan_in()) {
  if (bias) bias_.emplace(name_ + ".bias", static_cast<std::size_t>(g.out_channels));
  if (batch_norm) bn_.emplace(g.out_channels, name_);
}

template <typename T>
void ConvUnit<T>::init(Rng& rng) {
  const double fan_in = geom_.fan_in();
  if (bias_) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : weight_.value) v = static_cast<T>(dist(rng));
    for (T& v : bias_->value) v = static_cast<T>(dist(rng));
  } else {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (T& v : weight_.value) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
Tensor4<T> ConvUnit<T>::output_shape(const Tensor4<T>& x) const {
  return Tensor4<T>(x.batch(), geom_.out_channels, geom_.out_extent(x.height()), geom_.out_extent(x.width()));
}

template <typename T>
Tensor4<T> ConvUnit<T>::forward_train(const Tensor4<T>& x, TrainHook<T>* hook) {
  assert(x.channels() == geom_.in_channels);
  in_n_ = x.batch();
  in_h_ = x.height();
  in_w_ = x.width();
  const Tensor4<T>* src = &x;
  Tensor4<T> transformed;
  pass_.clear();
  if (hook != nullptr && hook->transforms_input()) {
    transformed = x;
    pass_.assign(x.size(), 1);
    hook->input(*this, transformed.span(), pass_);
    src = &transformed;
  }
  if (geom_.is_pointwise())
    cols_.assign(src->data(), src->data() + src->size());
  else
    im2col(*src, geom_, cols_);

  w_eff_ = weight_.value;
  if (hook != nullptr) hook->weights(*this, w_eff_);

  Tensor4<T> y = output_shape(x);
  const std::size_t ncols = y.plane_size();
  gemm(w_eff_.data(), cols_.data(), y.data(), static_cast<std::size_t>(rows()), static_cast<std::size_t>(fan_in()), ncols);
  if (bias_)
    for (int o = 0; o < rows(); ++o)
      for (T& v : y.channel(o)) v += bias_->value[static_cast<std::size_t>(o)];
  if (hook != nullptr) hook->output(*this, y.span());
  if (bn_) return bn_->forward_train(y);
  return y;
}

template <typename T>
Tensor4<T> ConvUnit<T>::backward(const Tensor4<T>& dy_in) {
  const Tensor4<T> dy = bn_ ? bn_->backward(dy_in) : dy_in;
  const std::size_t ncols = dy.plane_size();
  if (bias_)
    for (int o = 0; o < rows(); ++o) {
      double s = 0.0;
      for (T v : dy.channel(o)) s += v;
      bias_->grad[static_cast<std::size_t>(o)] += static_cast<T>(s);
    }
  gemm_bt(dy.data(), cols_.data(), weight_.grad.data(), static_cast<std::size_t>(rows()), ncols,
          static_cast<std::size_t>(fan_in()), true);

  Tensor4<T> dx(in_n_, geom_.in_channels, in_h_, in_w_);
  if (geom_.is_pointwise()) {
    gemm_at(w_eff_.data(), dy.data(), dx.data(), static_cast<std::size_t>(fan_in()), static_cast<std::size_t>(rows()),
            ncols);
  } else {
    std::vector<T> dcols(static_cast<std::size_t>(fan_in()) * ncols);
    gemm_at(w_eff_.data(), dy.data(), dcols.data(), static_cast<std::size_t>(fan_in()), static_cast<std::size_t>(rows()),
            ncols);
    col2im<T>(dcols, geom_, dx);
  }
  if (!pass_.empty()) {
    T* d = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!pass_[i]) d[i] = T{0};
  }
  return dx;
}

template <typename T>
Tensor4<T> ConvUnit<T>::forward_infer(const Tensor4<T>& x, UnitExecutor<T>& exec) const {
  assert(x.channels() == geom_.in_channels);
  Tensor4<T> y = output_shape(x);
  const std::size_t ncols = y.plane_size();
  std::optional<Tensor4<T>> transformed;
  if (exec.transforms_input()) {
    transformed = x;
    exec.input(*this, transformed->span());
  }
  const Tensor4<T>& in = transformed ? *transformed : x;
  if (geom_.is_pointwise()) {
    exec.matmul(*this, in.span(), ncols, y.span());
  } else {
    std::vector<T> cols;
    im2col(in, geom_, cols);
    exec.matmul(*this, cols, ncols, y.span());
  }
  if (bias_)
    for (int o = 0; o < rows(); ++o)
      for (T& v : y.channel(o)) v += bias_->value[static_cast<std::size_t>(o)];
  if (bn_) bn_->apply_eval(y);
  return y;
}

template <typename T>
void ConvUnit<T>::fold_batch_norm() {
  if (!bn_) return;
  if (!bias_) bias_.emplace(name_ + ".bias", static_cast<std::size_t>(rows()));
  const auto fan = static_cast<std::size_t>(fan_in());
  for (int o = 0; o < rows(); ++o) {
    const auto oi = static_cast<std::size_t>(o);
    const T s = bn_->eval_scale(o);
    for (std::size_t k = 0; k < fan; ++k) weight_.value[oi * fan + k] *= s;
    bias_->value[oi] = (bias_->value[oi] - bn_->running_mean[oi]) * s + bn_->beta.value[oi];
  }
  bn_.reset();
  std::fill(weight_.grad.begin(), weight_.grad.end(), T{0});
  bias_->grad.assign(bias_->value.size(), T{0});
}

template <typename T>
void ConvUnit<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
  if (bn_) {
    out.push_back(&bn_->gamma);
    out.push_back(&bn_->beta);
  }
}

template <typename T>
std::size_t ConvUnit<T>::parameter_count() const {
  std::size_t n = weight_.size();
  if (bias_) n += bias_->size();
  if (bn_) n += bn_->gamma.size() + bn_->beta.size();
  return n;
}

// ---------------------------------------------------------------------------
// Parameter-free layers

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.batch(), x.channels(), x.height(), x.width());
  const T* s = x.data();
  T* d = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = s[i] > T{0} ? s[i] : T{0};
  return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy) {
  Tensor4<T> dx(dy.batch(), dy.channels(), dy.height(), dy.width());
  const T* s = x.data();
  const T* g = dy.data();
  T* d = dx.data();
  for (std::size_t i = 0; i < dy.size(); ++i) d[i] = s[i] > T{0} ? g[i] : T{0};
  return dx;
}

namespace {

inline int pool_count(int y, int x, int h, int w) {
  const int ny = 1 + (y > 0) + (y < h - 1);
  const int nx = 1 + (x > 0) + (x < w - 1);
  return ny * nx;
}

}  // namespace

template <typename T>
Tensor4<T> avg_pool3x3_forward(const Tensor4<T>& x) {
  const int h = x.height(), w = x.width();
  Tensor4<T> y(x.batch(), x.channels(), h, w);
  const std::size_t images = static_cast<std::size_t>(x.batch()) * x.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T* src = x.data() + im * h * w;
    T* dst = y.data() + im * h * w;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        T s{0};
        for (int dy = -1; dy <= 1; ++dy) {
          const int iy = yy + dy;
          if (iy < 0 || iy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int ix = xx + dx;
            if (ix >= 0 && ix < w) s += src[iy * w + ix];
          }
        }
        dst[yy * w + xx] = s / static_cast<T>(pool_count(yy, xx, h, w));
      }
  }
  return y;
}

template <typename T>
Tensor4<T> avg_pool3x3_backward(const Tensor4<T>& dy) {
  const int h = dy.height(), w = dy.width();
  Tensor4<T> dx(dy.batch(), dy.channels(), h, w);
  const std::size_t images = static_cast<std::size_t>(dy.batch()) * dy.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T* g = dy.data() + im * h * w;
    T* d = dx.data() + im * h * w;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const T share = g[yy * w + xx] / static_cast<T>(pool_count(yy, xx, h, w));
        for (int oy = -1; oy <= 1; ++oy) {
          const int iy = yy + oy;
          if (iy < 0 || iy >= h) continue;
          for (int ox = -1; ox <= 1; ++ox) {
            const int ix = xx + ox;
            if (ix >= 0 && ix < w) d[iy * w + ix] += share;
          }
        }
      }
  }
  return dx;
}

template <typename T>
Tensor4<T> avg_pool2x2_forward(const Tensor4<T>& x) {
  const int h = x.height(), w = x.width(), ho = h / 2, wo = w / 2;
  Tensor4<T> y(x.batch(), x.channels(), ho, wo);
  const std::size_t images = static_cast<std::size_t>(x.batch()) * x.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T* s = x.data() + im * h * w;
    T* d = y.data() + im * ho * wo;
    for (int yy = 0; yy < ho; ++yy)
      for (int xx = 0; xx < wo; ++xx) {
        const T* p = s + (2 * yy) * w + 2 * xx;
        d[yy * wo + xx] = (p[0] + p[1] + p[w] + p[w + 1]) * T(0.25);
      }
  }
  return y;
}

template <typename T>
Tensor4<T> avg_pool2x2_backward(const Tensor4<T>& dy, int in_h, int in_w) {
  const int ho = dy.height(), wo = dy.width();
  Tensor4<T> dx(dy.batch(), dy.channels(), in_h, in_w);
  const std::size_t images = static_cast<std::size_t>(dy.batch()) * dy.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T* g = dy.data() + im * ho * wo;
    T* d = dx.data() + im * in_h * in_w;
    for (int yy = 0; yy < ho; ++yy)
      for (int xx = 0; xx < wo; ++xx) {
        const T v = g[yy * wo + xx] * T(0.25);
        T* p = d + (2 * yy) * in_w + 2 * xx;
        p[0] += v;
        p[1] += v;
        p[in_w] += v;
        p[in_w + 1] += v;
      }
  }
  return dx;
}

template <typename T>
Tensor4<T> global_avg_pool_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.batch(), x.channels(), 1, 1);
  const std::size_t hw = x.image_size();
  const std::size_t images = static_cast<std::size_t>(x.batch()) * x.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T* s = x.data() + im * hw;
    T acc{0};
    for (std::size_t i = 0; i < hw; ++i) acc += s[i];
    y.data()[im] = acc / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& dy, int in_h, int in_w) {
  Tensor4<T> dx(dy.batch(), dy.channels(), in_h, in_w);
  const std::size_t hw = static_cast<std::size_t>(in_h) * in_w;
  const std::size_t images = static_cast<std::size_t>(dy.batch()) * dy.channels();
  for (std::size_t im = 0; im < images; ++im) {
    const T v = dy.data()[im] / static_cast<T>(hw);
    std::fill(dx.data() + im * hw, dx.data() + (im + 1) * hw, v);
  }
  return dx;
}

template <typename T>
LossResult softmax_cross_entropy(const Tensor4<T>& logits, std::span<const int> labels, Tensor4<T>* dlogits) {
  const int n = logits.batch(), k = logits.channels();
  assert(static_cast<int>(labels.size()) == n);
  if (dlogits != nullptr) *dlogits = Tensor4<T>(n, k, 1, 1);
  LossResult result;
  std::vector<double> p(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    int best = 0;
    for (int c = 0; c < k; ++c) {
      const double v = logits.data()[static_cast<std::size_t>(c) * n + i];
      if (v > mx) {
        mx = v;
        best = c;
      }
    }
    double z = 0.0;
    for (int c = 0; c < k; ++c) {
      p[static_cast<std::size_t>(c)] = std::exp(logits.data()[static_cast<std::size_t>(c) * n + i] - mx);
      z += p[static_cast<std::size_t>(c)];
    }
    const int y = labels[static_cast<std::size_t>(i)];
    result.loss -= std::log(p[static_cast<std::size_t>(y)] / z);
    if (best == y) ++result.correct;
    if (dlogits != nullptr)
      for (int c = 0; c < k; ++c)
        dlogits->data()[static_cast<std::size_t>(c) * n + i] =
            static_cast<T>((p[static_cast<std::size_t>(c)] / z - (c == y ? 1.0 : 0.0)) / n);
  }
  result.loss /= n;
  return result;
}

template <typename T>
std::vector<int> argmax_classes(const Tensor4<T>& logits) {
  const int n = logits.batch(), k = logits.channels();
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    T best = logits.data()[static_cast<std::size_t>(i)];
    for (int c = 1; c < k; ++c) {
      const T v = logits.data()[static_cast<std::size_t>(c) * n + i];
      if (v > best) {
        best = v;
        out[static_cast<std::size_t>(i)] = c;
      }
    }
  }
  return out;
}

#define ANALOGNAS_INSTANTIATE_LAYERS(T)                                                                  \
  template void im2col<T>(const Tensor4<T>&, const ConvGeometry&, std::vector<T>&);                      \
  template void col2im<T>(std::span<const T>, const ConvGeometry&, Tensor4<T>&);                         \
  template class DigitalExecutor<T>;                                                                     \
  template class BatchNorm<T>;                                                                           \
  template class ConvUnit<T>;                                                                            \
  template Tensor4<T> relu_forward<T>(const Tensor4<T>&);                                                \
  template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);                            \
  template Tensor4<T> avg_pool3x3_forward<T>(const Tensor4<T>&);                                         \
  template Tensor4<T> avg_pool3x3_backward<T>(const Tensor4<T>&);                                        \
  template Tensor4<T> avg_pool2x2_forward<T>(const Tensor4<T>&);                                         \
  template Tensor4<T> avg_pool2x2_backward<T>(const Tensor4<T>&, int, int);                              \
  template Tensor4<T> global_avg_pool_forward<T>(const Tensor4<T>&);                                     \
  template Tensor4<T> global_avg_pool_backward<T>(const Tensor4<T>&, int, int);                          \
  template LossResult softmax_cross_entropy<T>(const Tensor4<T>&, std::span<const int>, Tensor4<T>*);    \
  template std::vector<int> argmax_classes<T>(const Tensor4<T>&);

ANALOGNAS_INSTANTIATE_LAYERS(float)
ANALOGNAS_INSTANTIATE_LAYERS(double)

#undef ANALOGNAS_INSTANTIATE_LAYERS

}  // namespace analognas::nn
