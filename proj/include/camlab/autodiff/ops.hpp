// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "camlab/autodiff/tensor.hpp"

namespace camlab::ad {

namespace detail {

inline void require_matrix(const Tensor& t, const char* op) {
  if (t.dim() > 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx_from_xy) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
  return Tensor::make_result(x.shape(), std::move(y), {x}, [dfdx_from_xy](Node& n) {
    if (double* gx = input_grad(n, 0)) {
      const auto& xv = n.inputs[0]->data;
      for (std::size_t i = 0; i < n.data.size(); ++i) gx[i] += n.grad[i] * dfdx_from_xy(xv[i], n.data[i]);
    }
  });
}

}  // namespace detail

/// C = A·B for A [m×p], B [p×q].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  if (b.rows() != p)
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> c(m * q, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = A[i * p + k];
      for (std::size_t j = 0; j < q; ++j) c[i * q + j] += aik * B[k * q + j];
    }
  return Tensor::make_result({m, q}, std::move(c), {a, b}, [m, p, q](detail::Node& n) {
    const double* G = n.grad.data();
    const double* A = n.inputs[0]->data.data();
    const double* B = n.inputs[1]->data.data();
    if (double* ga = input_grad(n, 0))  // dA = dC·Bᵀ
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < p; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < q; ++j) s += G[i * q + j] * B[k * q + j];
          ga[i * p + k] += s;
        }
    if (double* gb = input_grad(n, 1))  // dB = Aᵀ·dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < p; ++k) {
          const double aik = A[i * p + k];
          for (std::size_t j = 0; j < q; ++j) gb[k * q + j] += aik * G[i * q + j];
        }
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = input_grad(n, k))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (double* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

/// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& n) {
    const auto& av = n.inputs[0]->data;
    const auto& bv = n.inputs[1]->data;
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    if (double* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
  });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

/// x [m×n] + b broadcast over rows; b has n entries in any layout.
inline Tensor add_row(const Tensor& x, const Tensor& b) {
  detail::require_matrix(x, "add_row");
  const std::size_t m = x.rows(), c = x.cols();
  if (b.size() != c)
    throw DimensionError("add_row: " + shape_str(b.shape()) + " cannot broadcast over " + shape_str(x.shape()));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] + b[j];
  return Tensor::make_result(x.shape(), std::move(y), {x, b}, [m, c](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (double* g = input_grad(n, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
  });
}

/// x [m×n] ⊙ g broadcast over rows; g has n entries.
inline Tensor mul_row(const Tensor& x, const Tensor& g) {
  detail::require_matrix(x, "mul_row");
  const std::size_t m = x.rows(), c = x.cols();
  if (g.size() != c)
    throw DimensionError("mul_row: " + shape_str(g.shape()) + " cannot broadcast over " + shape_str(x.shape()));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] * g[j];
  return Tensor::make_result(x.shape(), std::move(y), {x, g}, [m, c](detail::Node& n) {
    const auto& xv = n.inputs[0]->data;
    const auto& gv = n.inputs[1]->data;
    if (double* gx = input_grad(n, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += n.grad[i * c + j] * gv[j];
    if (double* gg = input_grad(n, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) gg[j] += n.grad[i * c + j] * xv[i * c + j];
  });
}

/// x·w + b.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_row(matmul(x, w), b); }

inline Tensor transpose(const Tensor& a) {
  detail::require_matrix(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = a[i * c + j];
  return Tensor::make_result({c, r}, std::move(y), {a}, [r, c](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[j * r + i];
  });
}

/// Same data under a new shape with equal element count.
inline Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return Tensor::make_result(std::move(shape), a.values(), {a}, [](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

/// Concatenation along the last axis.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_cols");
    if (p.rows() != r)
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> y(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) y[i * total + off + j] = parts[k][i * widths[k] + j];
    off += widths[k];
  }
  return Tensor::make_result({r, total}, std::move(y), parts, [r, total, widths](detail::Node& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = input_grad(n, k))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += n.grad[i * total + off + j];
      off += widths[k];
    }
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_rows");
    if (p.cols() != c)
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    total += p.rows();
    sizes.push_back(p.size());
  }
  std::vector<double> y;
  y.reserve(total * c);
  for (const auto& p : parts) y.insert(y.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({total, c}, std::move(y), parts, [sizes](detail::Node& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (double* g = input_grad(n, k))
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += n.grad[off + i];
      off += sizes[k];
    }
  });
}

/// Columns [begin, end).
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  detail::require_matrix(x, "slice_cols");
  const std::size_t r = x.rows(), c = x.cols();
  if (begin >= end || end > c)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  std::vector<double> y(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) y[i * w + j] = x[i * c + begin + j];
  return Tensor::make_result({r, w}, std::move(y), {x}, [r, c, w, begin](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += n.grad[i * w + j];
  });
}

/// Output row i is input row idx[i]; repeated indices accumulate grads.
inline Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx) {
  detail::require_matrix(x, "gather_rows");
  const std::size_t r = x.rows(), c = x.cols();
  if (idx.empty()) throw DimensionError("gather_rows: empty index list");
  std::vector<double> y(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r) throw DimensionError("gather_rows: row index out of range for " + shape_str(x.shape()));
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[idx[i] * c + j];
  }
  const std::size_t out_rows = idx.size();
  return Tensor::make_result({out_rows, c}, std::move(y), {x}, [c, idx = std::move(idx)](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += n.grad[i * c + j];
  });
}

/// Flat elements x[idx[i]] as an [len×1] column.
inline Tensor gather(const Tensor& x, std::vector<std::size_t> idx) {
  if (idx.empty()) throw DimensionError("gather: empty index list");
  std::vector<double> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.size()) throw DimensionError("gather: index out of range for " + shape_str(x.shape()));
    y[i] = x[idx[i]];
  }
  const std::size_t len = idx.size();
  return Tensor::make_result({len, 1}, std::move(y), {x}, [idx = std::move(idx)](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += n.grad[i];
  });
}

/// [1×c] → [m×c].
inline Tensor repeat_rows(const Tensor& x, std::size_t m) {
  if (x.rows() != 1) throw DimensionError("repeat_rows: expected a single row, got " + shape_str(x.shape()));
  const std::size_t c = x.cols();
  std::vector<double> y(m * c);
  for (std::size_t i = 0; i < m; ++i) std::copy(x.data().begin(), x.data().end(), y.begin() + i * c);
  return Tensor::make_result({m, c}, std::move(y), {x}, [m, c](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
  });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result({1}, {s}, {x}, [](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.inputs[0]->data.size(); ++i) g[i] += n.grad[0];
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

/// Column means: [m×c] → [1×c].
inline Tensor mean_rows(const Tensor& x) {
  detail::require_matrix(x, "mean_rows");
  const std::size_t m = x.rows(), c = x.cols();
  std::vector<double> y(c, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += x[i * c + j];
  for (auto& v : y) v /= static_cast<double>(m);
  return Tensor::make_result({1, c}, std::move(y), {x}, [m, c](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[j] / static_cast<double>(m);
  });
}

/// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
  detail::require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), c = x.cols();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      const double v = x[i * c + j];
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
      mx = std::max(mx, v);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (y[i * c + j] = std::exp(x[i * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] /= z;
  }
  return Tensor::make_result(x.shape(), std::move(y), {x}, [m, c](detail::Node& n) {
    if (double* g = input_grad(n, 0))
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += n.grad[i * c + j] * n.data[i * c + j];
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.data[i * c + j] * (n.grad[i * c + j] - dot);
      }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Per-row normalization to zero mean / unit variance, then gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps) {
  detail::require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), c = x.cols();
  if (gain.size() != c || bias.size() != c)
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match " + shape_str(x.shape()));
  std::vector<double> xhat(x.size()), inv_std(m), y(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[i * c + j] - mu) * (x[i * c + j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (x[i * c + j] - mu) * inv_std[i];
      y[i * c + j] = xhat[i * c + j] * gain[j] + bias[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(y), {x, gain, bias},
      [m, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
        const auto& gv = n.inputs[1]->data;
        double* gx = input_grad(n, 0);
        double* gg = input_grad(n, 1);
        double* gb = input_grad(n, 2);
        for (std::size_t i = 0; i < m; ++i) {
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double dy = n.grad[i * c + j];
            if (gg) gg[j] += dy * xhat[i * c + j];
            if (gb) gb[j] += dy;
            const double dxh = dy * gv[j];
            s1 += dxh;
            s2 += dxh * xhat[i * c + j];
          }
          if (gx) {
            const double cd = static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = n.grad[i * c + j] * gv[j];
              gx[i * c + j] += inv_std[i] / cd * (cd * dxh - s1 - xhat[i * c + j] * s2);
            }
          }
        }
      });
}

inline constexpr double kBceClampEps = 1e-7;

/// Mean binary cross entropy. `target` is treated as a constant and must hold
/// only 0/1 values.
inline Tensor bce_loss(const Tensor& pred, const Tensor& target, double clamp_eps = kBceClampEps) {
  if (pred.size() != target.size())
    throw DimensionError("bce_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  for (double t : target.data())
    if (t != 0.0 && t != 1.0) throw ValidationError("bce_loss: targets must be 0 or 1");
  const double lo = clamp_eps, hi = 1.0 - clamp_eps;
  const double count = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], lo, hi);
    total -= target[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
  }
  auto tv = target.values();
  return Tensor::make_result({1}, {total / count}, {pred}, [lo, hi, count, tv = std::move(tv)](detail::Node& n) {
    if (double* g = input_grad(n, 0)) {
      const auto& pv = n.inputs[0]->data;
      for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] < lo || pv[i] > hi) continue;
        const double d = tv[i] == 1.0 ? -1.0 / pv[i] : 1.0 / (1.0 - pv[i]);
        g[i] += n.grad[0] * d / count;
      }
    }
  });
}

}  // namespace camlab::ad
