#include "idsr/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>

// Small products otherwise take Eigen's coefficient-based path, whose
// vector/scalar split depends on buffer alignment and so breaks bitwise
// reproducibility between runs.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>

#include "idsr/error.hpp"

namespace idsr::ad {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

template <class T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.defined() && b.defined() && a.shape() == b.shape(), Errc::shape_mismatch,
          std::string(op) + ": shapes differ (" + (a.defined() ? a.shape().str() : "undefined") + " vs " +
              (b.defined() ? b.shape().str() : "undefined") + ")");
}

template <class T>
bool wants(const Node<T>* n) {
  return n != nullptr && n->requires_grad;
}

// One sample: cols is (C*kh*kw) x (H*W).
template <class T>
void im2col(const T* in, int C, int H, int W, int kh, int kw, Padding pad, T* cols) {
  const int ph = kh / 2, pw = kw / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        T* row = cols + static_cast<std::size_t>((c * kh + i) * kw + j) * hw;
        const int dx = j - pw;
        const int x0 = std::clamp(-dx, 0, W);
        const int x1 = std::max(x0, std::clamp(W - dx, 0, W));
        for (int y = 0; y < H; ++y) {
          T* r = row + static_cast<std::size_t>(y) * W;
          int sy = y + i - ph;
          if (sy < 0 || sy >= H) {
            if (pad == Padding::zero) {
              std::fill(r, r + W, T(0));
              continue;
            }
            sy = clamp_index(sy, H);
          }
          const T* src = in + (static_cast<std::size_t>(c) * H + sy) * W;
          const T left = pad == Padding::zero ? T(0) : src[0];
          const T right = pad == Padding::zero ? T(0) : src[W - 1];
          for (int x = 0; x < x0; ++x) r[x] = left;
          for (int x = x0; x < x1; ++x) r[x] = src[x + dx];
          for (int x = x1; x < W; ++x) r[x] = right;
        }
      }
}

template <class T>
void col2im_add(const T* cols, int C, int H, int W, int kh, int kw, Padding pad, T* out) {
  const int ph = kh / 2, pw = kw / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        const T* row = cols + static_cast<std::size_t>((c * kh + i) * kw + j) * hw;
        const int dx = j - pw;
        const int x0 = std::clamp(-dx, 0, W);
        const int x1 = std::max(x0, std::clamp(W - dx, 0, W));
        for (int y = 0; y < H; ++y) {
          const T* r = row + static_cast<std::size_t>(y) * W;
          int sy = y + i - ph;
          if (sy < 0 || sy >= H) {
            if (pad == Padding::zero) continue;
            sy = clamp_index(sy, H);
          }
          T* dst = out + (static_cast<std::size_t>(c) * H + sy) * W;
          if (pad == Padding::replicate) {
            for (int x = 0; x < x0; ++x) dst[0] += r[x];
            for (int x = x1; x < W; ++x) dst[W - 1] += r[x];
          }
          for (int x = x0; x < x1; ++x) dst[x + dx] += r[x];
        }
      }
}

// Source row for tap offset `sy`, or null when zero padding skips it.
template <class T>
const T* source_row(const T* in, int sy, int H, int W, Padding pad) {
  if (sy < 0 || sy >= H) {
    if (pad == Padding::zero) return nullptr;
    sy = clamp_index(sy, H);
  }
  return in + static_cast<std::size_t>(sy) * W;
}

// r[x] += w * src[x + dx] for x in [0, W), with out-of-row reads padded.
template <class T>
void shifted_axpy(T* r, const T* src, int W, int dx, T w, Padding pad) {
  const int x0 = std::clamp(-dx, 0, W);
  const int x1 = std::max(x0, std::clamp(W - dx, 0, W));
  if (pad == Padding::replicate) {
    for (int x = 0; x < x0; ++x) r[x] += w * src[0];
    for (int x = x1; x < W; ++x) r[x] += w * src[W - 1];
  }
  const T* s = src + dx;
  for (int x = x0; x < x1; ++x) r[x] += w * s[x];
}

// Adjoint of shifted_axpy: dst[x + dx] += w * g[x], border reads folded back.
template <class T>
void shifted_axpy_adjoint(T* dst, const T* g, int W, int dx, T w, Padding pad) {
  const int x0 = std::clamp(-dx, 0, W);
  const int x1 = std::max(x0, std::clamp(W - dx, 0, W));
  if (pad == Padding::replicate) {
    T left = 0, right = 0;
    for (int x = 0; x < x0; ++x) left += g[x];
    for (int x = x1; x < W; ++x) right += g[x];
    dst[0] += w * left;
    dst[W - 1] += w * right;
  }
  T* d = dst + dx;
  for (int x = x0; x < x1; ++x) d[x] += w * g[x];
}

// Shared by filter_rows / filter_cols / depthwise: out[y,x] = sum k[i][j] in[y+i-ph, x+j-pw].
template <class T>
void correlate_plane(const T* in, int H, int W, const T* k, int kh, int kw, Padding pad, T* out) {
  const int ph = kh / 2, pw = kw / 2;
  for (int y = 0; y < H; ++y) {
    T* r = out + static_cast<std::size_t>(y) * W;
    std::fill(r, r + W, T(0));
    for (int i = 0; i < kh; ++i) {
      const T* src = source_row(in, y + i - ph, H, W, pad);
      if (!src) continue;
      for (int j = 0; j < kw; ++j)
        if (k[i * kw + j] != T(0)) shifted_axpy(r, src, W, j - pw, k[i * kw + j], pad);
    }
  }
}

template <class T>
void correlate_plane_backward(const T* gout, int H, int W, const T* k, int kh, int kw, Padding pad,
                              T* gin) {
  const int ph = kh / 2, pw = kw / 2;
  for (int y = 0; y < H; ++y) {
    const T* g = gout + static_cast<std::size_t>(y) * W;
    for (int i = 0; i < kh; ++i) {
      int sy = y + i - ph;
      if (sy < 0 || sy >= H) {
        if (pad == Padding::zero) continue;
        sy = clamp_index(sy, H);
      }
      T* dst = gin + static_cast<std::size_t>(sy) * W;
      for (int j = 0; j < kw; ++j)
        if (k[i * kw + j] != T(0)) shifted_axpy_adjoint(dst, g, W, j - pw, k[i * kw + j], pad);
    }
  }
}

template <class T>
Tensor<T> fixed_depthwise(const Tensor<T>& x, std::vector<T> kernels, bool shared, int kh, int kw,
                          Padding pad) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  const std::size_t ksize = static_cast<std::size_t>(kh) * kw;
  std::vector<T> out(s.numel());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const T* k = kernels.data() + (shared ? 0 : static_cast<std::size_t>(c) * ksize);
      correlate_plane(x.data().data() + off, s.h, s.w, k, kh, kw, pad, out.data() + off);
    }
  Node<T>* xn = x.node();
  return make_result<T>(s, std::move(out), {x},
                        [xn, s, kernels = std::move(kernels), shared, kh, kw, pad, plane, ksize](Node<T>& self) {
                          for (int n = 0; n < s.n; ++n)
                            for (int c = 0; c < s.c; ++c) {
                              const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
                              const T* k = kernels.data() + (shared ? 0 : static_cast<std::size_t>(c) * ksize);
                              correlate_plane_backward(self.grad.data() + off, s.h, s.w, k, kh, kw, pad,
                                                       xn->grad.data() + off);
                            }
                        });
}

template <class T>
std::vector<T> taps_as(const std::vector<double>& taps) {
  require(taps.size() % 2 == 1, Errc::invalid_argument, "filter taps must have odd length");
  return std::vector<T>(taps.begin(), taps.end());
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Padding padding) {
  const Shape xs = x.shape(), ws = weight.shape();
  require(ws.c == xs.c, Errc::shape_mismatch,
          "conv2d: weight " + ws.str() + " does not accept input " + xs.str());
  require(ws.h % 2 == 1 && ws.w % 2 == 1, Errc::shape_mismatch, "conv2d: kernel sizes must be odd");
  if (bias.defined())
    require(bias.shape() == Shape{1, ws.n, 1, 1}, Errc::shape_mismatch,
            "conv2d: bias must be 1x" + std::to_string(ws.n) + "x1x1, got " + bias.shape().str());
  const int M = ws.n, C = xs.c, H = xs.h, W = xs.w;
  const int K = ws.c * ws.h * ws.w;
  const int HW = H * W;
  const bool pointwise = ws.h == 1 && ws.w == 1;
  const Shape os{xs.n, M, H, W};

  std::vector<T> out(os.numel());
  std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(K) * HW);
  const Eigen::Map<const Mat<T>> wmat(weight.data().data(), M, K);
  for (int n = 0; n < xs.n; ++n) {
    const T* xin = x.data().data() + static_cast<std::size_t>(n) * C * HW;
    if (!pointwise) im2col(xin, C, H, W, ws.h, ws.w, padding, cols.data());
    const T* colp = pointwise ? xin : cols.data();
    Eigen::Map<Mat<T>> o(out.data() + static_cast<std::size_t>(n) * M * HW, M, HW);
    o.noalias() = wmat * Eigen::Map<const Mat<T>>(colp, K, HW);
    if (bias.defined()) o.colwise() += Eigen::Map<const Vec<T>>(bias.data().data(), M);
  }

  Node<T>* xn = x.node();
  Node<T>* wn = weight.node();
  Node<T>* bn = bias.defined() ? bias.node() : nullptr;
  return make_result<T>(os, std::move(out), {x, weight, bias},
                        [xn, wn, bn, xs, ws, M, C, H, W, K, HW, pointwise, padding](Node<T>& self) {
    const bool gx = wants(xn), gw = wants(wn), gb = wants(bn);
    std::vector<T> scratch((!pointwise && (gx || gw)) ? static_cast<std::size_t>(K) * HW : 0);
    const Eigen::Map<const Mat<T>> wm(wn->value.data(), M, K);
    for (int n = 0; n < xs.n; ++n) {
      const Eigen::Map<const Mat<T>> dout(self.grad.data() + static_cast<std::size_t>(n) * M * HW, M, HW);
      if (gb)
        for (int m = 0; m < M; ++m) {
          const T* row = self.grad.data() + (static_cast<std::size_t>(n) * M + m) * HW;
          T acc = 0;
          for (int i = 0; i < HW; ++i) acc += row[i];
          bn->grad[static_cast<std::size_t>(m)] += acc;
        }
      const T* xin = xn->value.data() + static_cast<std::size_t>(n) * C * HW;
      if (gw) {
        if (!pointwise) im2col(xin, C, H, W, ws.h, ws.w, padding, scratch.data());
        const T* colp = pointwise ? xin : scratch.data();
        Eigen::Map<Mat<T>>(wn->grad.data(), M, K).noalias() +=
            dout * Eigen::Map<const Mat<T>>(colp, K, HW).transpose();
      }
      if (gx) {
        T* gin = xn->grad.data() + static_cast<std::size_t>(n) * C * HW;
        if (pointwise) {
          Eigen::Map<Mat<T>>(gin, K, HW).noalias() += wm.transpose() * dout;
        } else {
          Eigen::Map<Mat<T>>(scratch.data(), K, HW).noalias() = wm.transpose() * dout;
          col2im_add(scratch.data(), C, H, W, ws.h, ws.w, padding, gin);
        }
      }
    }
  });
}

template <class T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel, Padding padding) {
  const Shape ks = kernel.shape();
  require(!kernel.requires_grad(), Errc::invalid_argument, "depthwise_conv2d: kernel must be fixed");
  require(ks.c == 1 && (ks.n == 1 || ks.n == x.shape().c), Errc::shape_mismatch,
          "depthwise_conv2d: kernel " + ks.str() + " does not fit input " + x.shape().str());
  require(ks.h % 2 == 1 && ks.w % 2 == 1, Errc::shape_mismatch, "depthwise_conv2d: kernel sizes must be odd");
  std::vector<T> k(kernel.data().begin(), kernel.data().end());
  return fixed_depthwise(x, std::move(k), ks.n == 1, ks.h, ks.w, padding);
}

template <class T>
Tensor<T> filter_rows(const Tensor<T>& x, const std::vector<double>& taps) {
  const int len = static_cast<int>(taps.size());
  return fixed_depthwise(x, taps_as<T>(taps), true, 1, len, Padding::replicate);
}

template <class T>
Tensor<T> filter_cols(const Tensor<T>& x, const std::vector<double>& taps) {
  const int len = static_cast<int>(taps.size());
  return fixed_depthwise(x, taps_as<T>(taps), true, len, 1, Padding::replicate);
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, [xn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xn->value[i] > T(0)) xn->grad[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-in[i]));
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, [xn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T s = self.value[i];
      xn->grad[i] += self.grad[i] * s * (T(1) - s);
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] -= self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i] * bn->value[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (T& v : out) v *= s;
  Node<T>* an = a.node();
  return make_result<T>(a.shape(), std::move(out), {a}, [an, s](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), Errc::invalid_argument, "concat_channels: nothing to concatenate");
  Shape s = parts.front().shape();
  s.c = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    require(ps.n == s.n && ps.h == s.h && ps.w == s.w, Errc::shape_mismatch,
            "concat_channels: incompatible part " + ps.str());
    s.c += ps.c;
  }
  const std::size_t plane = s.plane();
  std::vector<T> out(s.numel());
  std::vector<Node<T>*> nodes;
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p.shape().c;
    for (int n = 0; n < s.n; ++n)
      std::copy_n(p.data().data() + static_cast<std::size_t>(n) * pc * plane, pc * plane,
                  out.data() + (static_cast<std::size_t>(n) * s.c + off) * plane);
    nodes.push_back(p.node());
    offsets.push_back(off);
    off += pc;
  }
  return make_result<T>(s, std::move(out), parts, [nodes, offsets, s, plane](Node<T>& self) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      Node<T>* p = nodes[k];
      if (!p->requires_grad) continue;
      const int pc = p->shape.c;
      for (int n = 0; n < s.n; ++n) {
        const T* src = self.grad.data() + (static_cast<std::size_t>(n) * s.c + offsets[k]) * plane;
        T* dst = p->grad.data() + static_cast<std::size_t>(n) * pc * plane;
        for (std::size_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count) {
  const Shape xs = x.shape();
  require(begin >= 0 && count > 0 && begin + count <= xs.c, Errc::shape_mismatch,
          "slice_channels: range out of bounds for " + xs.str());
  const Shape s{xs.n, count, xs.h, xs.w};
  const std::size_t plane = s.plane();
  std::vector<T> out(s.numel());
  for (int n = 0; n < s.n; ++n)
    std::copy_n(x.data().data() + (static_cast<std::size_t>(n) * xs.c + begin) * plane, count * plane,
                out.data() + static_cast<std::size_t>(n) * count * plane);
  Node<T>* xn = x.node();
  return make_result<T>(s, std::move(out), {x}, [xn, xs, s, begin, plane](Node<T>& self) {
    for (int n = 0; n < s.n; ++n) {
      const T* src = self.grad.data() + static_cast<std::size_t>(n) * s.c * plane;
      T* dst = xn->grad.data() + (static_cast<std::size_t>(n) * xs.c + begin) * plane;
      for (std::size_t i = 0; i < s.c * plane; ++i) dst[i] += src[i];
    }
  });
}

template <class T>
Tensor<T> broadcast_mul_channel(const Tensor<T>& x, const Tensor<T>& map) {
  const Shape xs = x.shape(), ms = map.shape();
  require(ms.n == xs.n && ms.c == 1 && ms.h == xs.h && ms.w == xs.w, Errc::shape_mismatch,
          "broadcast_mul_channel: map " + ms.str() + " does not fit " + xs.str());
  const std::size_t plane = xs.plane();
  std::vector<T> out(xs.numel());
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * xs.c + c) * plane;
      const T* m = map.data().data() + static_cast<std::size_t>(n) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = x.data()[off + i] * m[i];
    }
  Node<T>* xn = x.node();
  Node<T>* mn = map.node();
  return make_result<T>(xs, std::move(out), {x, map}, [xn, mn, xs, plane](Node<T>& self) {
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * xs.c + c) * plane;
        const std::size_t moff = static_cast<std::size_t>(n) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T g = self.grad[off + i];
          if (xn->requires_grad) xn->grad[off + i] += g * mn->value[moff + i];
          if (mn->requires_grad) mn->grad[moff + i] += g * xn->value[off + i];
        }
      }
  });
}

template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  const Shape xs = x.shape(), ss = s.shape();
  require(ss.n == xs.n && ss.c == xs.c && ss.h == 1 && ss.w == 1, Errc::shape_mismatch,
          "scale_channels: scales " + ss.str() + " do not fit " + xs.str());
  const std::size_t plane = xs.plane();
  std::vector<T> out(xs.numel());
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    const T f = s.data()[nc];
    for (std::size_t i = 0; i < plane; ++i) out[nc * plane + i] = x.data()[nc * plane + i] * f;
  }
  Node<T>* xn = x.node();
  Node<T>* sn = s.node();
  return make_result<T>(xs, std::move(out), {x, s}, [xn, sn, xs, plane](Node<T>& self) {
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
      const T f = sn->value[nc];
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const T g = self.grad[nc * plane + i];
        if (xn->requires_grad) xn->grad[nc * plane + i] += g * f;
        acc += g * xn->value[nc * plane + i];
      }
      if (sn->requires_grad) sn->grad[nc] += acc;
    }
  });
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> channel_pool_stats(const Tensor<T>& x) {
  const Shape xs = x.shape();
  const Shape s{xs.n, 1, xs.h, xs.w};
  const std::size_t plane = xs.plane();
  std::vector<T> avg(s.numel()), mx(s.numel());
  std::vector<int> arg(s.numel(), 0);
  for (int n = 0; n < xs.n; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t o = static_cast<std::size_t>(n) * plane + i;
      T sum = 0, best = 0;
      for (int c = 0; c < xs.c; ++c) {
        const T v = x.data()[(static_cast<std::size_t>(n) * xs.c + c) * plane + i];
        sum += v;
        if (c == 0 || v > best) {
          best = v;
          arg[o] = c;
        }
      }
      avg[o] = sum / static_cast<T>(xs.c);
      mx[o] = best;
    }
  Node<T>* xn = x.node();
  auto a = make_result<T>(s, std::move(avg), {x}, [xn, xs, plane](Node<T>& self) {
    const T inv = T(1) / static_cast<T>(xs.c);
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c)
        for (std::size_t i = 0; i < plane; ++i)
          xn->grad[(static_cast<std::size_t>(n) * xs.c + c) * plane + i] +=
              self.grad[static_cast<std::size_t>(n) * plane + i] * inv;
  });
  auto m = make_result<T>(s, std::move(mx), {x}, [xn, xs, plane, arg = std::move(arg)](Node<T>& self) {
    for (int n = 0; n < xs.n; ++n)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t o = static_cast<std::size_t>(n) * plane + i;
        xn->grad[(static_cast<std::size_t>(n) * xs.c + arg[o]) * plane + i] += self.grad[o];
      }
  });
  return {a, m};
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> global_pool_stats(const Tensor<T>& x) {
  const Shape xs = x.shape();
  const Shape s{xs.n, xs.c, 1, 1};
  const std::size_t plane = xs.plane();
  const std::size_t count = static_cast<std::size_t>(xs.n) * xs.c;
  std::vector<T> avg(count), mx(count);
  std::vector<std::size_t> arg(count, 0);
  for (std::size_t nc = 0; nc < count; ++nc) {
    const T* p = x.data().data() + nc * plane;
    T sum = 0, best = p[0];
    for (std::size_t i = 0; i < plane; ++i) {
      sum += p[i];
      if (p[i] > best) {
        best = p[i];
        arg[nc] = i;
      }
    }
    avg[nc] = sum / static_cast<T>(plane);
    mx[nc] = best;
  }
  Node<T>* xn = x.node();
  auto a = make_result<T>(s, std::move(avg), {x}, [xn, plane, count](Node<T>& self) {
    const T inv = T(1) / static_cast<T>(plane);
    for (std::size_t nc = 0; nc < count; ++nc)
      for (std::size_t i = 0; i < plane; ++i) xn->grad[nc * plane + i] += self.grad[nc] * inv;
  });
  auto m = make_result<T>(s, std::move(mx), {x}, [xn, plane, count, arg = std::move(arg)](Node<T>& self) {
    for (std::size_t nc = 0; nc < count; ++nc) xn->grad[nc * plane + arg[nc]] += self.grad[nc];
  });
  return {a, m};
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "l1_loss");
  const std::size_t n = a.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a.data()[i] - b.data()[i]);
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>({1, 1, 1, 1}, {acc / static_cast<T>(n)}, {a, b}, [an, bn, n](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = an->value[i] - bn->value[i];
      const T sg = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (an->requires_grad) an->grad[i] += sg;
      if (bn->requires_grad) bn->grad[i] -= sg;
    }
  });
}

template <class T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mse_loss");
  const std::size_t n = a.numel();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>({1, 1, 1, 1}, {acc / static_cast<T>(n)}, {a, b}, [an, bn, n](Node<T>& self) {
    const T g = T(2) * self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = (an->value[i] - bn->value[i]) * g;
      if (an->requires_grad) an->grad[i] += d;
      if (bn->requires_grad) bn->grad[i] -= d;
    }
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  Node<T>* xn = x.node();
  return make_result<T>({1, 1, 1, 1}, {acc}, {x}, [xn](Node<T>& self) {
    for (T& g : xn->grad) g += self.grad[0];
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape.numel() == x.numel(), Errc::shape_mismatch,
          "reshape: " + x.shape().str() + " cannot become " + shape.str());
  std::vector<T> out(x.data().begin(), x.data().end());
  Node<T>* xn = x.node();
  return make_result<T>(shape, std::move(out), {x}, [xn](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

#define IDSR_AD_INSTANTIATE(T)                                                                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Padding);         \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, Padding);                 \
  template Tensor<T> filter_rows(const Tensor<T>&, const std::vector<double>&);                     \
  template Tensor<T> filter_cols(const Tensor<T>&, const std::vector<double>&);                     \
  template Tensor<T> relu(const Tensor<T>&);                                                        \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                               \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                                    \
  template Tensor<T> broadcast_mul_channel(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                            \
  template std::pair<Tensor<T>, Tensor<T>> channel_pool_stats(const Tensor<T>&);                    \
  template std::pair<Tensor<T>, Tensor<T>> global_pool_stats(const Tensor<T>&);                     \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                              \
  template Tensor<T> sum(const Tensor<T>&);

IDSR_AD_INSTANTIATE(float)
IDSR_AD_INSTANTIATE(double)

#undef IDSR_AD_INSTANTIATE

}  // namespace idsr::ad
