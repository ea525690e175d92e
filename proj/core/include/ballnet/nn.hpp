#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "ballnet/autograd.hpp"

namespace ballnet::nn {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapM = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapM = Eigen::Map<const MatRM<S>>;

// ---------------------------------------------------------------------------
// im2col for stride-1 same-padding 2D convolution on (N,H,W,C) tensors.
// ---------------------------------------------------------------------------

template <typename S>
void im2col_same(const Tensor<S>& x, int k, Tensor<S>& cols) {
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int pad = (k - 1) / 2;
  cols = Tensor<S>({n * h * w, int64_t(k) * k * c});
  S* out = cols.ptr();
  const S* in = x.ptr();
  for (int64_t bn = 0; bn < n; ++bn) {
    const S* img = in + bn * h * w * c;
    for (int64_t oh = 0; oh < h; ++oh) {
      for (int64_t ow = 0; ow < w; ++ow) {
        S* row = out + ((bn * h + oh) * w + ow) * k * k * c;
        for (int ky = 0; ky < k; ++ky) {
          int64_t iy = oh + ky - pad;
          for (int kx = 0; kx < k; ++kx) {
            int64_t ix = ow + kx - pad;
            S* dst = row + (ky * k + kx) * c;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              std::memcpy(dst, img + (iy * w + ix) * c, sizeof(S) * c);
            } else {
              std::memset(dst, 0, sizeof(S) * c);
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_same_add(const Tensor<S>& cols, int k, Tensor<S>& dx) {
  const int64_t n = dx.dim(0), h = dx.dim(1), w = dx.dim(2), c = dx.dim(3);
  const int pad = (k - 1) / 2;
  const S* in = cols.ptr();
  S* out = dx.ptr();
  for (int64_t bn = 0; bn < n; ++bn) {
    S* img = out + bn * h * w * c;
    for (int64_t oh = 0; oh < h; ++oh) {
      for (int64_t ow = 0; ow < w; ++ow) {
        const S* row = in + ((bn * h + oh) * w + ow) * k * k * c;
        for (int ky = 0; ky < k; ++ky) {
          int64_t iy = oh + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            int64_t ix = ow + kx - pad;
            if (ix < 0 || ix >= w) continue;
            const S* src = row + (ky * k + kx) * c;
            S* dst = img + (iy * w + ix) * c;
            for (int64_t ci = 0; ci < c; ++ci) dst[ci] += src[ci];
          }
        }
      }
    }
  }
}

namespace detail {
// Output-node pattern shared by all ops: build the result variable first,
// then push one closure that reads y->grad and scatters into the inputs.
template <typename S>
VarPtr<S> make_output(Tape<S>& tape, Tensor<S> value, bool rg, std::function<void(VarPtr<S>)> bwd) {
  auto y = make_var<S>(std::move(value), rg);
  if (rg && bwd) {
    tape.record(Tensor<S>(), true, [y, bwd]() { bwd(y); });
  }
  return y;
}
}  // namespace detail

/// Stride-1, same-padding 2D convolution.
/// x: (N,H,W,Cin), weight: (k*k*Cin, Cout), bias: (Cout).
template <typename S>
VarPtr<S> conv2d(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& weight,
                 const VarPtr<S>& bias, int k) {
  const int64_t n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2),
                cin = x->value.dim(3);
  const int64_t cout = weight->value.dim(1);
  if (weight->value.dim(0) != int64_t(k) * k * cin)
    throw std::invalid_argument("conv2d: weight shape " + shape_string(weight->value.shape) +
                                " does not match kernel " + std::to_string(k) + " and input " +
                                shape_string(x->value.shape));

  Tensor<S> out({n, h, w, cout});
  {
    Tensor<S> cols;
    if (k == 1) {
      CMapM<S> xm(x->value.ptr(), n * h * w, cin);
      MapM<S> om(out.ptr(), n * h * w, cout);
      CMapM<S> wm(weight->value.ptr(), cin, cout);
      om.noalias() = xm * wm;
    } else {
      im2col_same(x->value, k, cols);
      CMapM<S> cm(cols.ptr(), cols.dim(0), cols.dim(1));
      MapM<S> om(out.ptr(), n * h * w, cout);
      CMapM<S> wm(weight->value.ptr(), weight->value.dim(0), cout);
      om.noalias() = cm * wm;
    }
    CMapM<S> bm(bias->value.ptr(), 1, cout);
    MapM<S> om(out.ptr(), n * h * w, cout);
    om.rowwise() += bm.row(0);
  }

  bool rg = x->requires_grad || weight->requires_grad || bias->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg,
      [x, weight, bias, k, n, h, w, cin, cout](VarPtr<S> y) {
    const Tensor<S>& gy = y->grad;
    if (gy.data.empty()) return;
    CMapM<S> gym(gy.ptr(), n * h * w, cout);
    if (bias->requires_grad) {
      MapM<S> gb(bias->ensure_grad().ptr(), 1, cout);
      gb.row(0) += gym.colwise().sum();
    }
    if (k == 1) {
      CMapM<S> xm(x->value.ptr(), n * h * w, cin);
      if (weight->requires_grad) {
        MapM<S> gw(weight->ensure_grad().ptr(), cin, cout);
        gw.noalias() += xm.transpose() * gym;
      }
      if (x->requires_grad) {
        CMapM<S> wm(weight->value.ptr(), cin, cout);
        MapM<S> gx(x->ensure_grad().ptr(), n * h * w, cin);
        gx.noalias() += gym * wm.transpose();
      }
      return;
    }
    Tensor<S> cols;
    im2col_same(x->value, k, cols);  // recomputed, not retained across the pass
    CMapM<S> cm(cols.ptr(), cols.dim(0), cols.dim(1));
    if (weight->requires_grad) {
      MapM<S> gw(weight->ensure_grad().ptr(), weight->value.dim(0), cout);
      gw.noalias() += cm.transpose() * gym;
    }
    if (x->requires_grad) {
      Tensor<S> dcols({cols.dim(0), cols.dim(1)});
      MapM<S> dcm(dcols.ptr(), dcols.dim(0), dcols.dim(1));
      CMapM<S> wm(weight->value.ptr(), weight->value.dim(0), cout);
      dcm.noalias() = gym * wm.transpose();
      col2im_same_add(dcols, k, x->ensure_grad());
    }
  });
}

// ---------------------------------------------------------------------------
// Causal dilated 1D convolution over time: x is (T, P, C) where P collects
// batch and spatial positions; only past samples enter each output step.
// ---------------------------------------------------------------------------
template <typename S>
VarPtr<S> conv1d_causal(Tape<S>& tape, const VarPtr<S>& x, const VarPtr<S>& weight,
                        const VarPtr<S>& bias, int k, int dilation) {
  const int64_t t = x->value.dim(0), p = x->value.dim(1), c = x->value.dim(2);
  const int64_t cout = weight->value.dim(1);
  if (weight->value.dim(0) != int64_t(k) * c)
    throw std::invalid_argument("conv1d_causal: weight/input channel mismatch");

  auto build_cols = [x, k, dilation, t, p, c](Tensor<S>& cols) {
    cols = Tensor<S>({t * p, int64_t(k) * c});
    S* out = cols.ptr();
    const S* in = x->value.ptr();
    for (int64_t ti = 0; ti < t; ++ti) {
      for (int64_t pi = 0; pi < p; ++pi) {
        S* row = out + (ti * p + pi) * k * c;
        for (int kk = 0; kk < k; ++kk) {
          int64_t src_t = ti - int64_t(dilation) * (k - 1 - kk);
          S* dst = row + kk * c;
          if (src_t >= 0) {
            std::memcpy(dst, in + (src_t * p + pi) * c, sizeof(S) * c);
          } else {
            std::memset(dst, 0, sizeof(S) * c);
          }
        }
      }
    }
  };

  Tensor<S> out({t, p, cout});
  {
    Tensor<S> cols;
    build_cols(cols);
    CMapM<S> cm(cols.ptr(), t * p, k * c);
    CMapM<S> wm(weight->value.ptr(), k * c, cout);
    MapM<S> om(out.ptr(), t * p, cout);
    om.noalias() = cm * wm;
    CMapM<S> bm(bias->value.ptr(), 1, cout);
    om.rowwise() += bm.row(0);
  }

  bool rg = x->requires_grad || weight->requires_grad || bias->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg,
      [x, weight, bias, build_cols, k, dilation, t, p, c, cout](VarPtr<S> y) {
        const Tensor<S>& gy = y->grad;
        if (gy.data.empty()) return;
        CMapM<S> gym(gy.ptr(), t * p, cout);
        if (bias->requires_grad) {
          MapM<S> gb(bias->ensure_grad().ptr(), 1, cout);
          gb.row(0) += gym.colwise().sum();
        }
        Tensor<S> cols;
        build_cols(cols);
        CMapM<S> cm(cols.ptr(), t * p, k * c);
        if (weight->requires_grad) {
          MapM<S> gw(weight->ensure_grad().ptr(), k * c, cout);
          gw.noalias() += cm.transpose() * gym;
        }
        if (x->requires_grad) {
          Tensor<S> dcols({t * p, int64_t(k) * c});
          MapM<S> dcm(dcols.ptr(), t * p, k * c);
          CMapM<S> wm(weight->value.ptr(), k * c, cout);
          dcm.noalias() = gym * wm.transpose();
          Tensor<S>& gx = x->ensure_grad();
          const S* in = dcols.ptr();
          for (int64_t ti = 0; ti < t; ++ti)
            for (int64_t pi = 0; pi < p; ++pi) {
              const S* row = in + (ti * p + pi) * k * c;
              for (int kk = 0; kk < k; ++kk) {
                int64_t src_t = ti - int64_t(dilation) * (k - 1 - kk);
                if (src_t < 0) continue;
                S* dst = gx.ptr() + (src_t * p + pi) * c;
                const S* src = row + kk * c;
                for (int64_t ci = 0; ci < c; ++ci) dst[ci] += src[ci];
              }
            }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <typename S>
VarPtr<S> relu(Tape<S>& tape, const VarPtr<S>& x) {
  Tensor<S> out = x->value;
  for (auto& v : out.data) v = v > S(0) ? v : S(0);
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i)
      if (x->value[i] > S(0)) gx[i] += y->grad[i];
  });
}

template <typename S>
VarPtr<S> sigmoid(Tape<S>& tape, const VarPtr<S>& x) {
  Tensor<S> out = x->value;
  for (auto& v : out.data) v = S(1) / (S(1) + std::exp(-v));
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) {
      S s = y->value[i];
      gx[i] += y->grad[i] * s * (S(1) - s);
    }
  });
}

template <typename S>
VarPtr<S> tanh_act(Tape<S>& tape, const VarPtr<S>& x) {
  Tensor<S> out = x->value;
  for (auto& v : out.data) v = std::tanh(v);
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) {
      S t = y->value[i];
      gx[i] += y->grad[i] * (S(1) - t * t);
    }
  });
}

/// relu(x) scaled per channel so the maximum over all other axes is 1.
template <typename S>
VarPtr<S> normalized_relu(Tape<S>& tape, const VarPtr<S>& x, S eps = S(1e-5)) {
  const int64_t c = x->value.shape.back();
  const int64_t rows = x->value.size() / c;
  Tensor<S> r = x->value;
  for (auto& v : r.data) v = v > S(0) ? v : S(0);
  std::vector<S> cmax(c, S(0));
  std::vector<int64_t> argmax(c, -1);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      S v = r[i * c + ci];
      if (v > cmax[ci]) {
        cmax[ci] = v;
        argmax[ci] = i * c + ci;
      }
    }
  Tensor<S> out = r;
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t ci = 0; ci < c; ++ci) out[i * c + ci] /= cmax[ci] + eps;
  auto rv = std::make_shared<Tensor<S>>(std::move(r));
  return detail::make_output<S>(tape, std::move(out), x->requires_grad,
      [x, rv, cmax, argmax, c, rows, eps](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        Tensor<S>& gx = x->ensure_grad();
        std::vector<S> dm(c, S(0));
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t ci = 0; ci < c; ++ci) {
            int64_t idx = i * c + ci;
            S denom = cmax[ci] + eps;
            S g = y->grad[idx] / denom;
            if (x->value[idx] > S(0)) gx[idx] += g;
            dm[ci] -= y->grad[idx] * (*rv)[idx] / (denom * denom);
          }
        for (int64_t ci = 0; ci < c; ++ci) {
          if (argmax[ci] < 0) continue;
          if (x->value[argmax[ci]] > S(0)) gx[argmax[ci]] += dm[ci];
        }
      });
}

template <typename S>
VarPtr<S> add(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& b) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("add: shape mismatch " + shape_string(a->value.shape) + " vs " +
                                shape_string(b->value.shape));
  Tensor<S> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  bool rg = a->requires_grad || b->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg, [a, b](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    if (a->requires_grad) {
      Tensor<S>& ga = a->ensure_grad();
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += y->grad[i];
    }
    if (b->requires_grad) {
      Tensor<S>& gb = b->ensure_grad();
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += y->grad[i];
    }
  });
}

template <typename S>
VarPtr<S> mul(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("mul: shape mismatch");
  Tensor<S> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  bool rg = a->requires_grad || b->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg, [a, b](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    if (a->requires_grad) {
      Tensor<S>& ga = a->ensure_grad();
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += y->grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor<S>& gb = b->ensure_grad();
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += y->grad[i] * a->value[i];
    }
  });
}

template <typename S>
VarPtr<S> sub(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("sub: shape mismatch");
  Tensor<S> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  bool rg = a->requires_grad || b->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg, [a, b](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    if (a->requires_grad) {
      Tensor<S>& ga = a->ensure_grad();
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += y->grad[i];
    }
    if (b->requires_grad) {
      Tensor<S>& gb = b->ensure_grad();
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] -= y->grad[i];
    }
  });
}

/// View of channels [from, to) along the trailing axis.
template <typename S>
VarPtr<S> slice_channels(Tape<S>& tape, const VarPtr<S>& x, int64_t from, int64_t to) {
  const int64_t c = x->value.shape.back();
  if (from < 0 || to > c || from >= to) throw std::out_of_range("slice_channels");
  const int64_t rows = x->value.size() / c;
  auto shape = x->value.shape;
  shape.back() = to - from;
  Tensor<S> out(shape);
  for (int64_t i = 0; i < rows; ++i)
    std::memcpy(out.ptr() + i * (to - from), x->value.ptr() + i * c + from,
                sizeof(S) * (to - from));
  return detail::make_output<S>(tape, std::move(out), x->requires_grad,
      [x, from, to, c, rows](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        Tensor<S>& gx = x->ensure_grad();
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t ci = from; ci < to; ++ci)
            gx[i * c + ci] += y->grad[i * (to - from) + (ci - from)];
      });
}

/// a + w * z with a single learnable scalar w (shape {1}).
template <typename S>
VarPtr<S> add_scaled(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& w, const VarPtr<S>& z) {
  if (!a->value.same_shape(z->value)) throw std::invalid_argument("add_scaled: shape mismatch");
  S wv = w->value[0];
  Tensor<S> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += wv * z->value[i];
  bool rg = a->requires_grad || w->requires_grad || z->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg, [a, w, z, wv](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    if (a->requires_grad) {
      Tensor<S>& ga = a->ensure_grad();
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += y->grad[i];
    }
    if (w->requires_grad) {
      S acc = S(0);
      for (int64_t i = 0; i < z->value.size(); ++i) acc += y->grad[i] * z->value[i];
      w->ensure_grad()[0] += acc;
    }
    if (z->requires_grad) {
      Tensor<S>& gz = z->ensure_grad();
      for (int64_t i = 0; i < gz.size(); ++i) gz[i] += y->grad[i] * wv;
    }
  });
}

/// Concatenate along the trailing (channel) axis.
template <typename S>
VarPtr<S> concat_channels(Tape<S>& tape, const VarPtr<S>& a, const VarPtr<S>& b) {
  auto sa = a->value.shape, sb = b->value.shape;
  for (size_t i = 0; i + 1 < sa.size(); ++i)
    if (sa[i] != sb[i])
      throw std::invalid_argument("concat_channels: leading dims differ: " + shape_string(sa) +
                                  " vs " + shape_string(sb));
  int64_t ca = sa.back(), cb = sb.back();
  int64_t rows = a->value.size() / ca;
  auto so = sa;
  so.back() = ca + cb;
  Tensor<S> out(so);
  for (int64_t i = 0; i < rows; ++i) {
    std::memcpy(out.ptr() + i * (ca + cb), a->value.ptr() + i * ca, sizeof(S) * ca);
    std::memcpy(out.ptr() + i * (ca + cb) + ca, b->value.ptr() + i * cb, sizeof(S) * cb);
  }
  bool rg = a->requires_grad || b->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg, [a, b, rows, ca, cb](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    if (a->requires_grad) {
      Tensor<S>& ga = a->ensure_grad();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t ci = 0; ci < ca; ++ci) ga[i * ca + ci] += y->grad[i * (ca + cb) + ci];
    }
    if (b->requires_grad) {
      Tensor<S>& gb = b->ensure_grad();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t ci = 0; ci < cb; ++ci) gb[i * cb + ci] += y->grad[i * (ca + cb) + ca + ci];
    }
  });
}

template <typename S>
VarPtr<S> reshape(Tape<S>& tape, const VarPtr<S>& x, std::vector<int64_t> shape) {
  if (Tensor<S>::count(shape) != x->value.size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor<S> out = x->value;
  out.shape = std::move(shape);
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += y->grad[i];
  });
}

// ---------------------------------------------------------------------------
// Pooling / resampling on (N,H,W,C)
// ---------------------------------------------------------------------------

template <typename S>
VarPtr<S> maxpool2x2(Tape<S>& tape, const VarPtr<S>& x) {
  const int64_t n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
  if (h % 2 || w % 2) throw std::invalid_argument("maxpool2x2: odd spatial size");
  Tensor<S> out({n, h / 2, w / 2, c});
  auto arg = std::make_shared<std::vector<int64_t>>(out.size());
  const S* in = x->value.ptr();
  for (int64_t bn = 0; bn < n; ++bn)
    for (int64_t oh = 0; oh < h / 2; ++oh)
      for (int64_t ow = 0; ow < w / 2; ++ow)
        for (int64_t ci = 0; ci < c; ++ci) {
          int64_t best = -1;
          S bv = S(0);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int64_t idx = ((bn * h + oh * 2 + dy) * w + ow * 2 + dx) * c + ci;
              if (best < 0 || in[idx] > bv) {
                best = idx;
                bv = in[idx];
              }
            }
          int64_t oidx = ((bn * (h / 2) + oh) * (w / 2) + ow) * c + ci;
          out[oidx] = bv;
          (*arg)[oidx] = best;
        }
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x, arg](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    for (int64_t i = 0; i < y->grad.size(); ++i) gx[(*arg)[i]] += y->grad[i];
  });
}

/// Bilinear resize to (oh, ow), pixel-center alignment. Handles both up- and
/// downsampling; used for the x2 decoder upsampling and for tap resampling.
template <typename S>
VarPtr<S> bilinear_resize(Tape<S>& tape, const VarPtr<S>& x, int64_t oh, int64_t ow) {
  const int64_t n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
  const double sy = double(h) / double(oh), sx = double(w) / double(ow);
  struct Tap {
    int64_t y0, y1, x0, x1;
    S wy, wx;
  };
  auto taps = std::make_shared<std::vector<Tap>>(oh * ow);
  for (int64_t i = 0; i < oh; ++i) {
    double fy = (double(i) + 0.5) * sy - 0.5;
    double cy = std::clamp(fy, 0.0, double(h - 1));
    int64_t y0 = int64_t(std::floor(cy));
    int64_t y1 = std::min(y0 + 1, h - 1);
    for (int64_t j = 0; j < ow; ++j) {
      double fx = (double(j) + 0.5) * sx - 0.5;
      double cx = std::clamp(fx, 0.0, double(w - 1));
      int64_t x0 = int64_t(std::floor(cx));
      int64_t x1 = std::min(x0 + 1, w - 1);
      (*taps)[i * ow + j] = {y0, y1, x0, x1, S(cy - double(y0)), S(cx - double(x0))};
    }
  }
  Tensor<S> out({n, oh, ow, c});
  const S* in = x->value.ptr();
  for (int64_t bn = 0; bn < n; ++bn)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        const Tap& t = (*taps)[i * ow + j];
        const S* p00 = in + ((bn * h + t.y0) * w + t.x0) * c;
        const S* p01 = in + ((bn * h + t.y0) * w + t.x1) * c;
        const S* p10 = in + ((bn * h + t.y1) * w + t.x0) * c;
        const S* p11 = in + ((bn * h + t.y1) * w + t.x1) * c;
        S* o = out.ptr() + ((bn * oh + i) * ow + j) * c;
        for (int64_t ci = 0; ci < c; ++ci)
          o[ci] = (S(1) - t.wy) * ((S(1) - t.wx) * p00[ci] + t.wx * p01[ci]) +
                  t.wy * ((S(1) - t.wx) * p10[ci] + t.wx * p11[ci]);
      }
  return detail::make_output<S>(tape, std::move(out), x->requires_grad,
      [x, taps, n, h, w, c, oh, ow](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        Tensor<S>& gx = x->ensure_grad();
        for (int64_t bn = 0; bn < n; ++bn)
          for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j) {
              const auto& t = (*taps)[i * ow + j];
              const S* g = y->grad.ptr() + ((bn * oh + i) * ow + j) * c;
              S* p00 = gx.ptr() + ((bn * h + t.y0) * w + t.x0) * c;
              S* p01 = gx.ptr() + ((bn * h + t.y0) * w + t.x1) * c;
              S* p10 = gx.ptr() + ((bn * h + t.y1) * w + t.x0) * c;
              S* p11 = gx.ptr() + ((bn * h + t.y1) * w + t.x1) * c;
              for (int64_t ci = 0; ci < c; ++ci) {
                p00[ci] += (S(1) - t.wy) * (S(1) - t.wx) * g[ci];
                p01[ci] += (S(1) - t.wy) * t.wx * g[ci];
                p10[ci] += t.wy * (S(1) - t.wx) * g[ci];
                p11[ci] += t.wy * t.wx * g[ci];
              }
            }
      });
}

/// Spatial dropout: zeroes whole channel maps per sample, scales the rest.
template <typename S>
VarPtr<S> dropout_spatial(Tape<S>& tape, const VarPtr<S>& x, double p, std::mt19937& rng,
                          bool training) {
  if (!training || p <= 0.0) return x;
  const int64_t n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
  auto keep = std::make_shared<std::vector<uint8_t>>(n * c);
  std::bernoulli_distribution bern(1.0 - p);
  for (auto& k : *keep) k = bern(rng) ? 1 : 0;
  const S scale = S(1.0 / (1.0 - p));
  Tensor<S> out = x->value;
  for (int64_t bn = 0; bn < n; ++bn)
    for (int64_t i = 0; i < h * w; ++i)
      for (int64_t ci = 0; ci < c; ++ci) {
        int64_t idx = (bn * h * w + i) * c + ci;
        out[idx] = (*keep)[bn * c + ci] ? out[idx] * scale : S(0);
      }
  return detail::make_output<S>(tape, std::move(out), x->requires_grad,
      [x, keep, n, h, w, c, scale](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        Tensor<S>& gx = x->ensure_grad();
        for (int64_t bn = 0; bn < n; ++bn)
          for (int64_t i = 0; i < h * w; ++i)
            for (int64_t ci = 0; ci < c; ++ci) {
              int64_t idx = (bn * h * w + i) * c + ci;
              if ((*keep)[bn * c + ci]) gx[idx] += y->grad[idx] * scale;
            }
      });
}

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel
// ---------------------------------------------------------------------------

template <typename S>
struct BatchNorm {
  VarPtr<S> gamma, beta;       // learnable, shape {C}
  Tensor<S> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm(int64_t c = 0) {
    gamma = make_var<S>(Tensor<S>({c}, S(1)), true);
    beta = make_var<S>(Tensor<S>({c}), true);
    running_mean = Tensor<S>({c});
    running_var = Tensor<S>({c}, S(1));
  }
};

template <typename S>
VarPtr<S> batchnorm(Tape<S>& tape, const VarPtr<S>& x, BatchNorm<S>& bn, bool training) {
  const int64_t c = x->value.shape.back();
  const int64_t rows = x->value.size() / c;
  auto gamma = bn.gamma;
  auto beta = bn.beta;
  std::vector<S> mean(c), invstd(c);
  if (training) {
    std::vector<double> m(c, 0), v(c, 0);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t ci = 0; ci < c; ++ci) m[ci] += x->value[i * c + ci];
    for (int64_t ci = 0; ci < c; ++ci) m[ci] /= double(rows);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t ci = 0; ci < c; ++ci) {
        double d = x->value[i * c + ci] - m[ci];
        v[ci] += d * d;
      }
    for (int64_t ci = 0; ci < c; ++ci) {
      v[ci] /= double(rows);
      mean[ci] = S(m[ci]);
      invstd[ci] = S(1.0 / std::sqrt(v[ci] + bn.eps));
      bn.running_mean[ci] =
          S((1.0 - bn.momentum) * bn.running_mean[ci] + bn.momentum * m[ci]);
      double unbiased = rows > 1 ? v[ci] * double(rows) / double(rows - 1) : v[ci];
      bn.running_var[ci] =
          S((1.0 - bn.momentum) * bn.running_var[ci] + bn.momentum * unbiased);
    }
  } else {
    for (int64_t ci = 0; ci < c; ++ci) {
      mean[ci] = bn.running_mean[ci];
      invstd[ci] = S(1.0 / std::sqrt(double(bn.running_var[ci]) + bn.eps));
    }
  }
  Tensor<S> xhat({rows, c});
  Tensor<S> out = x->value;
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      S xh = (x->value[i * c + ci] - mean[ci]) * invstd[ci];
      xhat[i * c + ci] = xh;
      out[i * c + ci] = gamma->value[ci] * xh + beta->value[ci];
    }
  auto xh = std::make_shared<Tensor<S>>(std::move(xhat));
  bool rg = x->requires_grad || gamma->requires_grad || beta->requires_grad;
  return detail::make_output<S>(tape, std::move(out), rg,
      [x, gamma, beta, xh, invstd, rows, c, training](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        std::vector<S> dg(c, S(0)), db(c, S(0));
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t ci = 0; ci < c; ++ci) {
            db[ci] += y->grad[i * c + ci];
            dg[ci] += y->grad[i * c + ci] * (*xh)[i * c + ci];
          }
        if (gamma->requires_grad) {
          Tensor<S>& gg = gamma->ensure_grad();
          for (int64_t ci = 0; ci < c; ++ci) gg[ci] += dg[ci];
        }
        if (beta->requires_grad) {
          Tensor<S>& gb = beta->ensure_grad();
          for (int64_t ci = 0; ci < c; ++ci) gb[ci] += db[ci];
        }
        if (x->requires_grad) {
          Tensor<S>& gx = x->ensure_grad();
          if (training) {
            for (int64_t i = 0; i < rows; ++i)
              for (int64_t ci = 0; ci < c; ++ci) {
                S dxhat = y->grad[i * c + ci] * gamma->value[ci];
                gx[i * c + ci] += invstd[ci] * (dxhat - db[ci] * gamma->value[ci] / S(rows) -
                                                (*xh)[i * c + ci] * dg[ci] * gamma->value[ci] /
                                                    S(rows));
              }
          } else {
            for (int64_t i = 0; i < rows; ++i)
              for (int64_t ci = 0; ci < c; ++ci)
                gx[i * c + ci] += y->grad[i * c + ci] * gamma->value[ci] * invstd[ci];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Time-axis helpers for the sequence heads
// ---------------------------------------------------------------------------

/// Stack per-frame tensors (each (N,H,W,C)) into (T, N*H*W, C).
template <typename S>
VarPtr<S> stack_time(Tape<S>& tape, const std::vector<VarPtr<S>>& frames) {
  if (frames.empty()) throw std::invalid_argument("stack_time: empty input");
  const int64_t t = int64_t(frames.size());
  const int64_t per = frames[0]->value.size();
  const int64_t c = frames[0]->value.shape.back();
  Tensor<S> out({t, per / c, c});
  bool rg = false;
  for (int64_t ti = 0; ti < t; ++ti) {
    if (frames[ti]->value.size() != per) throw std::invalid_argument("stack_time: ragged frames");
    std::memcpy(out.ptr() + ti * per, frames[ti]->value.ptr(), sizeof(S) * per);
    rg = rg || frames[ti]->requires_grad;
  }
  return detail::make_output<S>(tape, std::move(out), rg, [frames, per](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    for (size_t ti = 0; ti < frames.size(); ++ti) {
      if (!frames[ti]->requires_grad) continue;
      Tensor<S>& g = frames[ti]->ensure_grad();
      const S* src = y->grad.ptr() + int64_t(ti) * per;
      for (int64_t i = 0; i < per; ++i) g[i] += src[i];
    }
  });
}

/// Select one time step from (T, P, C) -> (P, C).
template <typename S>
VarPtr<S> take_time(Tape<S>& tape, const VarPtr<S>& x, int64_t t) {
  const int64_t tt = x->value.dim(0), p = x->value.dim(1), c = x->value.dim(2);
  if (t < 0 || t >= tt) throw std::out_of_range("take_time");
  Tensor<S> out({p, c});
  std::memcpy(out.ptr(), x->value.ptr() + t * p * c, sizeof(S) * p * c);
  return detail::make_output<S>(tape, std::move(out), x->requires_grad, [x, t, p, c](VarPtr<S> y) {
    if (y->grad.data.empty()) return;
    Tensor<S>& gx = x->ensure_grad();
    S* dst = gx.ptr() + t * p * c;
    for (int64_t i = 0; i < p * c; ++i) dst[i] += y->grad[i];
  });
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean squared error against a constant target.
template <typename S>
VarPtr<S> mse_loss(Tape<S>& tape, const VarPtr<S>& pred, const Tensor<S>& target) {
  if (pred->value.shape != target.shape)
    throw std::invalid_argument("mse_loss: shape mismatch " + shape_string(pred->value.shape) +
                                " vs " + shape_string(target.shape));
  const int64_t n = pred->value.size();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = double(pred->value[i]) - double(target[i]);
    acc += d * d;
  }
  Tensor<S> out({1});
  out[0] = S(acc / double(n));
  auto tgt = std::make_shared<Tensor<S>>(target);
  return detail::make_output<S>(tape, std::move(out), pred->requires_grad,
      [pred, tgt, n](VarPtr<S> y) {
        if (y->grad.data.empty()) return;
        S g = y->grad[0] * S(2) / S(n);
        Tensor<S>& gp = pred->ensure_grad();
        for (int64_t i = 0; i < n; ++i) gp[i] += g * (pred->value[i] - (*tgt)[i]);
      });
}

// ---------------------------------------------------------------------------
// Parameter initialization
// ---------------------------------------------------------------------------

/// He-uniform conv weight (fan_in = k*k*cin) and matching uniform bias.
template <typename S>
std::pair<VarPtr<S>, VarPtr<S>> conv_params(int64_t fan_in, int64_t cout, std::mt19937& rng,
                                            bool zero = false) {
  Tensor<S> w({fan_in, cout});
  Tensor<S> b({cout});
  if (!zero) {
    uniform_init(w, std::sqrt(6.0 / double(fan_in)), rng);
    uniform_init(b, 1.0 / std::sqrt(double(fan_in)), rng);
  }
  return {make_var<S>(std::move(w), true), make_var<S>(std::move(b), true)};
}

template <typename S>
struct ConvParams {
  VarPtr<S> weight, bias;
};

template <typename S>
ConvParams<S> make_conv_params(int64_t fan_in, int64_t cout, std::mt19937& rng,
                               bool zero = false) {
  auto [w, b] = conv_params<S>(fan_in, cout, rng, zero);
  return {w, b};
}

}  // namespace ballnet::nn
