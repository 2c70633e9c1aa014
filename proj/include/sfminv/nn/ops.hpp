#pragma once

// Raw forward/backward kernels on NCHW tensors. Everything is deterministic
// and single-threaded; backward kernels accumulate (+=) into the given grad
// buffers, callers zero them between steps.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstring>
#include <vector>

#include "sfminv/nn/gemm.hpp"
#include "sfminv/nn/tensor.hpp"

namespace sfminv::nn::ops {

// ---------------------------------------------------------------------------
// conv2d (cross-correlation), im2col + GEMM

inline std::int64_t conv_out_dim(std::int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename T>
std::vector<T>& scratch(int which) {
  thread_local std::vector<T> bufs[3];
  return bufs[which];
}

// col layout: rows = Ci*kh*kw (ci major, then kh, kw), cols = Ho*Wo.
template <typename T>
void im2col(const T* x, std::int64_t Ci, std::int64_t H, std::int64_t W, int k, int stride,
            int pad, std::int64_t Ho, std::int64_t Wo, T* col) {
  for (std::int64_t ci = 0; ci < Ci; ++ci) {
    const T* chan = x + ci * H * W;
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        T* dst = col + ((ci * k + kh) * k + kw) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          std::int64_t ih = oh * stride - pad + kh;
          T* row = dst + oh * Wo;
          if (ih < 0 || ih >= H) {
            std::fill(row, row + Wo, T(0));
            continue;
          }
          const T* src = chan + ih * W;
          if (stride == 1) {
            std::int64_t iw0 = -pad + kw;
            std::int64_t lo = std::max<std::int64_t>(0, -iw0);
            std::int64_t hi = std::min<std::int64_t>(Wo, W - iw0);
            for (std::int64_t ow = 0; ow < lo; ++ow) row[ow] = T(0);
            if (hi > lo) std::memcpy(row + lo, src + iw0 + lo, std::size_t(hi - lo) * sizeof(T));
            for (std::int64_t ow = hi; ow < Wo; ++ow) row[ow] = T(0);
          } else {
            for (std::int64_t ow = 0; ow < Wo; ++ow) {
              std::int64_t iw = ow * stride - pad + kw;
              row[ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
            }
          }
        }
      }
  }
}

template <typename T>
void col2im_add(const T* col, std::int64_t Ci, std::int64_t H, std::int64_t W, int k, int stride,
                int pad, std::int64_t Ho, std::int64_t Wo, T* dx) {
  for (std::int64_t ci = 0; ci < Ci; ++ci) {
    T* chan = dx + ci * H * W;
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) {
        const T* src = col + ((ci * k + kh) * k + kw) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          std::int64_t ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          T* row = chan + ih * W;
          const T* s = src + oh * Wo;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            std::int64_t iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < W) row[iw] += s[ow];
          }
        }
      }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                         int pad) {
  require(x.rank() == 4 && w.rank() == 4, errc::shape_mismatch, "conv2d expects 4-d tensors");
  const std::int64_t N = x.size(0), Ci = x.size(1), H = x.size(2), W = x.size(3);
  const std::int64_t Co = w.size(0);
  const int k = int(w.size(2));
  require(w.size(1) == Ci && w.size(2) == w.size(3), errc::shape_mismatch,
          "conv2d: weight shape " + shape_str(w.shape) + " vs input " + shape_str(x.shape));
  require(b.numel() == Co, errc::shape_mismatch, "conv2d: bias size");
  const std::int64_t Ho = conv_out_dim(H, k, stride, pad);
  const std::int64_t Wo = conv_out_dim(W, k, stride, pad);
  require(Ho > 0 && Wo > 0, errc::shape_mismatch, "conv2d: empty output");

  Tensor<T> y({N, Co, Ho, Wo});
  auto& col = detail::scratch<T>(0);
  col.resize(std::size_t(Ci * k * k * Ho * Wo));
  for (std::int64_t n = 0; n < N; ++n) {
    detail::im2col(x.data() + n * Ci * H * W, Ci, H, W, k, stride, pad, Ho, Wo, col.data());
    gemm<T>(Co, Ho * Wo, Ci * k * k, w.data(), col.data(), y.data() + n * Co * Ho * Wo);
  }
  const T* bias = b.data();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t co = 0; co < Co; ++co) {
      T* dst = y.data() + (n * Co + co) * Ho * Wo;
      const T bv = bias[co];
      for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] += bv;
    }
  return y;
}

// Accumulates into whichever of dx/dw/db is non-null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, int stride,
                     int pad, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const std::int64_t N = x.size(0), Ci = x.size(1), H = x.size(2), W = x.size(3);
  const std::int64_t Co = w.size(0);
  const int k = int(w.size(2));
  const std::int64_t Ho = dy.size(2), Wo = dy.size(3);

  auto& col = detail::scratch<T>(0);
  auto& dcol = detail::scratch<T>(1);
  if (dw) col.resize(std::size_t(Ci * k * k * Ho * Wo));
  if (dx) dcol.resize(std::size_t(Ci * k * k * Ho * Wo));

  for (std::int64_t n = 0; n < N; ++n) {
    const T* dyn = dy.data() + n * Co * Ho * Wo;
    if (dw) {
      detail::im2col(x.data() + n * Ci * H * W, Ci, H, W, k, stride, pad, Ho, Wo, col.data());
      // dW += dY * col^T
      gemm_bt<T>(Co, Ci * k * k, Ho * Wo, dyn, col.data(), dw->data(), T(1));
    }
    if (dx) {
      // dcol = W^T * dY, then scatter back
      gemm_at<T>(Ci * k * k, Ho * Wo, Co, w.data(), dyn, dcol.data());
      detail::col2im_add(dcol.data(), Ci, H, W, k, stride, pad, Ho, Wo,
                         dx->data() + n * Ci * H * W);
    }
    if (db)
      for (std::int64_t co = 0; co < Co; ++co) {
        const T* src = dyn + co * Ho * Wo;
        T acc = 0;
        for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += src[i];
        db->v[std::size_t(co)] += acc;
      }
  }
}

// ---------------------------------------------------------------------------
// batch normalization

enum class BnMode {
  train,            // batch stats, running stats updated
  train_no_update,  // batch stats, running stats left alone
  eval,             // running stats
};

template <typename T>
struct BnSaved {
  std::vector<T> mean, invstd;  // per channel, only filled in train modes
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var, BnMode mode,
                            T momentum, T eps, std::type_identity_t<BnSaved<T>*> saved) {
  const std::int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const std::int64_t cnt = N * H * W;
  Tensor<T> y(x.shape);
  if (mode != BnMode::eval)
    require(cnt > 1, errc::degenerate_batch, "batchnorm needs more than one value per channel");

  for (std::int64_t c = 0; c < C; ++c) {
    T mean, invstd;
    if (mode == BnMode::eval) {
      mean = running_mean.v[std::size_t(c)];
      invstd = T(1) / std::sqrt(running_var.v[std::size_t(c)] + eps);
    } else {
      double sum = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* src = x.data() + (n * C + c) * H * W;
        for (std::int64_t i = 0; i < H * W; ++i) sum += src[i];
      }
      mean = T(sum / double(cnt));
      double ssq = 0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* src = x.data() + (n * C + c) * H * W;
        for (std::int64_t i = 0; i < H * W; ++i) {
          const double d = double(src[i]) - double(mean);
          ssq += d * d;
        }
      }
      T var = T(ssq / double(cnt));
      invstd = T(1) / std::sqrt(var + eps);
      if (mode == BnMode::train) {
        running_mean.v[std::size_t(c)] =
            momentum * running_mean.v[std::size_t(c)] + (T(1) - momentum) * mean;
        running_var.v[std::size_t(c)] =
            momentum * running_var.v[std::size_t(c)] + (T(1) - momentum) * var;
      }
      if (saved) {
        saved->mean.resize(std::size_t(C));
        saved->invstd.resize(std::size_t(C));
        saved->mean[std::size_t(c)] = mean;
        saved->invstd[std::size_t(c)] = invstd;
      }
    }
    const T g = gamma.v[std::size_t(c)], bt = beta.v[std::size_t(c)];
    for (std::int64_t n = 0; n < N; ++n) {
      const T* src = x.data() + (n * C + c) * H * W;
      T* dst = y.data() + (n * C + c) * H * W;
      for (std::int64_t i = 0; i < H * W; ++i) dst[i] = g * ((src[i] - mean) * invstd) + bt;
    }
  }
  return y;
}

// Train-mode backward through the batch statistics.
template <typename T>
void batchnorm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const BnSaved<T>& saved,
                        const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma, Tensor<T>* dbeta) {
  const std::int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const std::int64_t cnt = N * H * W;
  for (std::int64_t c = 0; c < C; ++c) {
    const T mean = saved.mean[std::size_t(c)], invstd = saved.invstd[std::size_t(c)];
    double sum_dy_d = 0, sum_dy_xhat_d = 0;
    for (std::int64_t n = 0; n < N; ++n) {
      const T* xs = x.data() + (n * C + c) * H * W;
      const T* ds = dy.data() + (n * C + c) * H * W;
      for (std::int64_t i = 0; i < H * W; ++i) {
        sum_dy_d += ds[i];
        sum_dy_xhat_d += double(ds[i]) * (double(xs[i]) - double(mean)) * double(invstd);
      }
    }
    const T sum_dy = T(sum_dy_d), sum_dy_xhat = T(sum_dy_xhat_d);
    if (dgamma) dgamma->v[std::size_t(c)] += sum_dy_xhat;
    if (dbeta) dbeta->v[std::size_t(c)] += sum_dy;
    if (dx) {
      const T g = gamma.v[std::size_t(c)];
      const T scale = g * invstd / T(cnt);
      for (std::int64_t n = 0; n < N; ++n) {
        const T* xs = x.data() + (n * C + c) * H * W;
        const T* ds = dy.data() + (n * C + c) * H * W;
        T* dd = dx->data() + (n * C + c) * H * W;
        for (std::int64_t i = 0; i < H * W; ++i) {
          T xhat = (xs[i] - mean) * invstd;
          dd[i] += scale * (T(cnt) * ds[i] - sum_dy - xhat * sum_dy_xhat);
        }
      }
    }
  }
}

// Eval-mode backward: the op is an affine map per channel.
template <typename T>
void batchnorm_backward_eval(const Tensor<T>& gamma, const Tensor<T>& running_var, T eps,
                             const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                             Tensor<T>* dbeta, const Tensor<T>& x, const Tensor<T>& running_mean) {
  const std::int64_t N = x.size(0), C = x.size(1), HW = x.size(2) * x.size(3);
  for (std::int64_t c = 0; c < C; ++c) {
    const T invstd = T(1) / std::sqrt(running_var.v[std::size_t(c)] + eps);
    const T mean = running_mean.v[std::size_t(c)];
    T sum_dy = 0, sum_dy_xhat = 0;
    for (std::int64_t n = 0; n < N; ++n) {
      const T* xs = x.data() + (n * C + c) * HW;
      const T* ds = dy.data() + (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) {
        sum_dy += ds[i];
        sum_dy_xhat += ds[i] * (xs[i] - mean) * invstd;
      }
    }
    if (dgamma) dgamma->v[std::size_t(c)] += sum_dy_xhat;
    if (dbeta) dbeta->v[std::size_t(c)] += sum_dy;
    if (dx) {
      const T scale = gamma.v[std::size_t(c)] * invstd;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* ds = dy.data() + (n * C + c) * HW;
        T* dd = dx->data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) dd[i] += scale * ds[i];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// activations

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
  return y;
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < x.v.size(); ++i)
    if (x.v[i] > T(0)) dx.v[i] += dy.v[i];
}

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : slope * x.v[i];
  return y;
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& x, T slope, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < x.v.size(); ++i) dx.v[i] += x.v[i] > T(0) ? dy.v[i] : slope * dy.v[i];
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = std::tanh(x.v[i]);
  return y;
}

template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < y.v.size(); ++i) dx.v[i] += dy.v[i] * (T(1) - y.v[i] * y.v[i]);
}

// Softmax over the last dimension of a 2-d tensor.
template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& x) {
  require(x.rank() == 2, errc::shape_mismatch, "softmax expects (N,K)");
  const std::int64_t N = x.size(0), K = x.size(1);
  Tensor<T> y(x.shape);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* src = x.data() + n * K;
    T* dst = y.data() + n * K;
    T mx = src[0];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, src[k]);
    T sum = 0;
    for (std::int64_t k = 0; k < K; ++k) {
      dst[k] = std::exp(src[k] - mx);
      sum += dst[k];
    }
    for (std::int64_t k = 0; k < K; ++k) dst[k] /= sum;
  }
  return y;
}

template <typename T>
void softmax_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  const std::int64_t N = y.size(0), K = y.size(1);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* ys = y.data() + n * K;
    const T* ds = dy.data() + n * K;
    T dot = 0;
    for (std::int64_t k = 0; k < K; ++k) dot += ys[k] * ds[k];
    T* dd = dx.data() + n * K;
    for (std::int64_t k = 0; k < K; ++k) dd[k] += ys[k] * (ds[k] - dot);
  }
}

// ---------------------------------------------------------------------------
// resampling / pooling / concat

template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& x) {
  const std::int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  Tensor<T> y({N, C, H * 2, W * 2});
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const T* src = x.data() + nc * H * W;
    T* dst = y.data() + nc * 4 * H * W;
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w) {
        T v = src[h * W + w];
        T* d = dst + (2 * h) * (2 * W) + 2 * w;
        d[0] = v;
        d[1] = v;
        d[2 * W] = v;
        d[2 * W + 1] = v;
      }
  }
  return y;
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  const std::int64_t N = dx.size(0), C = dx.size(1), H = dx.size(2), W = dx.size(3);
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const T* src = dy.data() + nc * 4 * H * W;
    T* dst = dx.data() + nc * H * W;
    for (std::int64_t h = 0; h < H; ++h)
      for (std::int64_t w = 0; w < W; ++w) {
        const T* s = src + (2 * h) * (2 * W) + 2 * w;
        dst[h * W + w] += s[0] + s[1] + s[2 * W] + s[2 * W + 1];
      }
  }
}

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::uint8_t>* argmax) {
  const std::int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  require(H % 2 == 0 && W % 2 == 0, errc::shape_mismatch, "maxpool2x2 needs even dims");
  Tensor<T> y({N, C, H / 2, W / 2});
  if (argmax) argmax->resize(std::size_t(y.numel()));
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const T* src = x.data() + nc * H * W;
    T* dst = y.data() + nc * (H / 2) * (W / 2);
    for (std::int64_t h = 0; h < H / 2; ++h)
      for (std::int64_t w = 0; w < W / 2; ++w) {
        const T* cell = src + (2 * h) * W + 2 * w;
        T best = cell[0];
        int arg = 0;
        if (cell[1] > best) { best = cell[1]; arg = 1; }
        if (cell[W] > best) { best = cell[W]; arg = 2; }
        if (cell[W + 1] > best) { best = cell[W + 1]; arg = 3; }
        dst[h * (W / 2) + w] = best;
        if (argmax) (*argmax)[std::size_t(nc * (H / 2) * (W / 2) + h * (W / 2) + w)] = std::uint8_t(arg);
      }
  }
  return y;
}

template <typename T>
void maxpool2x2_backward(const std::vector<std::uint8_t>& argmax, const Tensor<T>& dy,
                         Tensor<T>& dx) {
  const std::int64_t N = dx.size(0), C = dx.size(1), H = dx.size(2), W = dx.size(3);
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const T* src = dy.data() + nc * (H / 2) * (W / 2);
    T* dst = dx.data() + nc * H * W;
    for (std::int64_t h = 0; h < H / 2; ++h)
      for (std::int64_t w = 0; w < W / 2; ++w) {
        int arg = argmax[std::size_t(nc * (H / 2) * (W / 2) + h * (W / 2) + w)];
        std::int64_t off = (2 * h + arg / 2) * W + 2 * w + arg % 2;
        dst[off] += src[h * (W / 2) + w];
      }
  }
}

template <typename T>
Tensor<T> concat_channels_forward(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.size(0) == b.size(0) && a.size(2) == b.size(2) && a.size(3) == b.size(3),
          errc::shape_mismatch,
          "concat: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  const std::int64_t N = a.size(0), Ca = a.size(1), Cb = b.size(1), HW = a.size(2) * a.size(3);
  Tensor<T> y({N, Ca + Cb, a.size(2), a.size(3)});
  for (std::int64_t n = 0; n < N; ++n) {
    std::memcpy(y.data() + n * (Ca + Cb) * HW, a.data() + n * Ca * HW,
                std::size_t(Ca * HW) * sizeof(T));
    std::memcpy(y.data() + (n * (Ca + Cb) + Ca) * HW, b.data() + n * Cb * HW,
                std::size_t(Cb * HW) * sizeof(T));
  }
  return y;
}

template <typename T>
void concat_channels_backward(const Tensor<T>& dy, std::int64_t Ca, Tensor<T>* da, Tensor<T>* db) {
  const std::int64_t N = dy.size(0), C = dy.size(1), HW = dy.size(2) * dy.size(3);
  const std::int64_t Cb = C - Ca;
  for (std::int64_t n = 0; n < N; ++n) {
    if (da) {
      const T* src = dy.data() + n * C * HW;
      T* dst = da->data() + n * Ca * HW;
      for (std::int64_t i = 0; i < Ca * HW; ++i) dst[i] += src[i];
    }
    if (db) {
      const T* src = dy.data() + (n * C + Ca) * HW;
      T* dst = db->data() + n * Cb * HW;
      for (std::int64_t i = 0; i < Cb * HW; ++i) dst[i] += src[i];
    }
  }
}

// ---------------------------------------------------------------------------
// fully connected: y(N,Out) = x(N,In) * W(Out,In)^T + b

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.size(1) == w.size(1), errc::shape_mismatch,
          "fc: " + shape_str(x.shape) + " vs " + shape_str(w.shape));
  const std::int64_t N = x.size(0), In = x.size(1), Out = w.size(0);
  Tensor<T> y({N, Out});
  gemm_bt<T>(N, Out, In, x.data(), w.data(), y.data());
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < Out; ++o) y.v[std::size_t(n * Out + o)] += b.v[std::size_t(o)];
  return y;
}

template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                 Tensor<T>* dw, Tensor<T>* db) {
  const std::int64_t N = x.size(0), In = x.size(1), Out = w.size(0);
  if (dw) gemm_at<T>(Out, In, N, dy.data(), x.data(), dw->data(), T(1));
  if (db)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t o = 0; o < Out; ++o)
        db->v[std::size_t(o)] += dy.v[std::size_t(n * Out + o)];
  if (dx) gemm<T>(N, In, Out, dy.data(), w.data(), dx->data(), T(1));
}

// ---------------------------------------------------------------------------
// loss kernels (scalar outputs, shape {1})

template <typename T>
Tensor<T> l1_mean_forward(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l1_mean");
  double acc = 0;  // double accumulation keeps loss values precise in float nets
  for (std::size_t i = 0; i < a.v.size(); ++i) acc += std::abs(double(a.v[i]) - double(b.v[i]));
  Tensor<T> y({1});
  y.v[0] = T(acc / double(a.numel()));
  return y;
}

template <typename T>
void l1_mean_backward(const Tensor<T>& a, const Tensor<T>& b, T g, Tensor<T>* da, Tensor<T>* db) {
  const T s = g / T(a.numel());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    T d = a.v[i] - b.v[i];
    T sg = d > T(0) ? s : (d < T(0) ? -s : T(0));
    if (da) da->v[i] += sg;
    if (db) db->v[i] -= sg;
  }
}

template <typename T>
Tensor<T> sqdiff_mean_forward(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sqdiff_mean");
  double acc = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = double(a.v[i]) - double(b.v[i]);
    acc += d * d;
  }
  Tensor<T> y({1});
  y.v[0] = T(acc / double(a.numel()));
  return y;
}

template <typename T>
void sqdiff_mean_backward(const Tensor<T>& a, const Tensor<T>& b, T g, Tensor<T>* da,
                          Tensor<T>* db) {
  const T s = T(2) * g / T(a.numel());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    T d = s * (a.v[i] - b.v[i]);
    if (da) da->v[i] += d;
    if (db) db->v[i] -= d;
  }
}

// Binary cross entropy over (-1,1) predictions against {0,1} labels,
// restricted to flagged cells: per sample the sum over flagged cells of
// -[u*log((1+v)/2) + (1-u)*log((1-v)/2)], then the mean over the batch.
// `labels` and `mask` hold B*H*W bytes. Predictions at exactly +-1 are
// nudged inside the open interval so the log stays finite.
template <typename T>
inline constexpr T bce_edge_eps() {
  return sizeof(T) == 4 ? T(1e-7) : T(1e-12);
}

template <typename T>
Tensor<T> masked_tanh_bce_forward(const Tensor<T>& pred, const std::vector<std::uint8_t>& labels,
                                  const std::vector<std::uint8_t>& mask) {
  const std::int64_t B = pred.size(0), cells = pred.numel() / pred.size(0);
  require(pred.rank() == 4 && pred.size(1) == 1, errc::shape_mismatch,
          "masked bce expects (B,1,H,W)");
  require(labels.size() == pred.v.size() && mask.size() == pred.v.size(), errc::shape_mismatch,
          "masked bce: label/mask size");
  const double lim = 1.0 - double(bce_edge_eps<T>());
  double acc = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    const T* p = pred.data() + b * cells;
    const std::uint8_t* u = labels.data() + b * cells;
    const std::uint8_t* m = mask.data() + b * cells;
    for (std::int64_t i = 0; i < cells; ++i) {
      if (!m[i]) continue;
      const double v = std::clamp(double(p[i]), -lim, lim);
      // log((1+v)/2) = log1p(v) - log 2
      acc -= u[i] ? (std::log1p(v) - std::numbers::ln2) : (std::log1p(-v) - std::numbers::ln2);
    }
  }
  Tensor<T> y({1});
  y.v[0] = T(acc / double(B));
  return y;
}

template <typename T>
void masked_tanh_bce_backward(const Tensor<T>& pred, const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& mask, T g, Tensor<T>& dpred) {
  const std::int64_t B = pred.size(0), cells = pred.numel() / pred.size(0);
  const T lim = T(1) - bce_edge_eps<T>();
  const T s = g / T(B);
  for (std::int64_t b = 0; b < B; ++b) {
    const T* p = pred.data() + b * cells;
    const std::uint8_t* u = labels.data() + b * cells;
    const std::uint8_t* m = mask.data() + b * cells;
    T* d = dpred.data() + b * cells;
    for (std::int64_t i = 0; i < cells; ++i) {
      if (!m[i]) continue;
      T v = std::clamp(p[i], -lim, lim);
      d[i] += u[i] ? -s / (T(1) + v) : s / (T(1) - v);
    }
  }
}

// Mean over batch of per-sample -log softmax(logits)[target].
template <typename T>
Tensor<T> nll_forward(const Tensor<T>& logits, const std::vector<int>& targets) {
  const std::int64_t N = logits.size(0), K = logits.size(1);
  require(std::int64_t(targets.size()) == N, errc::shape_mismatch, "nll: target count");
  double acc = 0;
  for (std::int64_t n = 0; n < N; ++n) {
    const T* z = logits.data() + n * K;
    double mx = z[0];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, double(z[k]));
    double lse = 0;
    for (std::int64_t k = 0; k < K; ++k) lse += std::exp(double(z[k]) - mx);
    lse = mx + std::log(lse);
    acc += lse - double(z[targets[std::size_t(n)]]);
  }
  Tensor<T> y({1});
  y.v[0] = T(acc / double(N));
  return y;
}

template <typename T>
void nll_backward(const Tensor<T>& logits, const std::vector<int>& targets, T g, Tensor<T>& dz) {
  const std::int64_t N = logits.size(0), K = logits.size(1);
  const T s = g / T(N);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* z = logits.data() + n * K;
    T mx = z[0];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, z[k]);
    T sum = 0;
    for (std::int64_t k = 0; k < K; ++k) sum += std::exp(z[k] - mx);
    for (std::int64_t k = 0; k < K; ++k) {
      T p = std::exp(z[k] - mx) / sum;
      dz.v[std::size_t(n * K + k)] += s * (p - (k == targets[std::size_t(n)] ? T(1) : T(0)));
    }
  }
}

}  // namespace sfminv::nn::ops
