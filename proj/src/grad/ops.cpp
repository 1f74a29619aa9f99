#include "compgen/grad/ops.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace compgen::grad {

namespace kernels {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

}  // namespace kernels

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

template <class F, class G>
Var unary(const Var& a, F forward, G derivative) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  // derivative(x, y) gives dy/dx elementwise.
  auto y = std::make_shared<Tensor>(out);
  return a.tape().record(std::move(out), {a}, [a, y, derivative](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(a);
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * derivative(xv[i], (*y)[i]);
    tape.accumulate(a, ga);
  });
}

// Row-major [rows x cols] view of a rank-1 or rank-2 tensor.
std::pair<std::size_t, std::size_t> as_matrix(const Shape& s) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw DimensionError("expected rank 1 or 2, got " + shape_string(s));
}

struct ConvGeometry {
  std::size_t channels, height, width;  // image side
  std::size_t kernel, stride, padding;
  std::size_t out_h, out_w;             // patch grid
};

// cols[(n, oh, ow), (c, kh, kw)] <- image[n, c, ih, iw]
void im2col(const ConvGeometry& g, std::size_t batch, const double* image, double* cols) {
  const std::size_t patch = g.channels * g.kernel * g.kernel;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        double* row = cols + ((n * g.out_h + oh) * g.out_w + ow) * patch;
        for (std::size_t c = 0; c < g.channels; ++c) {
          const double* plane = image + (n * g.channels + c) * g.height * g.width;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
              double v = 0.0;
              if (ih >= 0 && iw >= 0 && ih < static_cast<long>(g.height) && iw < static_cast<long>(g.width)) {
                v = plane[ih * g.width + iw];
              }
              *row++ = v;
            }
          }
        }
      }
    }
  }
}

// image[n, c, ih, iw] += cols[(n, oh, ow), (c, kh, kw)]
void col2im(const ConvGeometry& g, std::size_t batch, const double* cols, double* image) {
  const std::size_t patch = g.channels * g.kernel * g.kernel;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const double* row = cols + ((n * g.out_h + oh) * g.out_w + ow) * patch;
        for (std::size_t c = 0; c < g.channels; ++c) {
          double* plane = image + (n * g.channels + c) * g.height * g.width;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
              const double v = *row++;
              if (ih >= 0 && iw >= 0 && ih < static_cast<long>(g.height) && iw < static_cast<long>(g.width)) {
                plane[ih * g.width + iw] += v;
              }
            }
          }
        }
      }
    }
  }
}

// [N, C, H, W] <-> [(N, H, W), C]
void nchw_to_rows(std::size_t n, std::size_t c, std::size_t hw, const double* src, double* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) dst[(b * hw + p) * c + ch] = src[(b * c + ch) * hw + p];
}

void rows_to_nchw(std::size_t n, std::size_t c, std::size_t hw, const double* src, double* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) dst[(b * c + ch) * hw + p] = src[(b * hw + p) * c + ch];
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(b)) {
      Tensor neg = g;
      for (double& v : neg.data()) v = -v;
      tape.accumulate(b, neg);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      Tensor ga = g;
      const Tensor& bv = tape.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
      tape.accumulate(a, ga);
    }
    if (tape.requires_grad(b)) {
      Tensor gb = g;
      const Tensor& av = tape.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
      tape.accumulate(b, gb);
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor& g) {
    Tensor ga = g;
    for (double& v : ga.data()) v *= factor;
    tape.accumulate(a, ga);
  });
}

Var add_scalar(const Var& a, double offset) {
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor& g) { tape.accumulate(a, g); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var leaky_relu(const Var& a, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw std::invalid_argument("leaky_relu slope must lie in (0, 1)");
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var clamp(const Var& a, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp needs lo < hi");
  return unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& tape, const Tensor& g) {
    Tensor ga(tape.value(a).shape(), g[0]);
    tape.accumulate(a, ga);
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  kernels::gemm_nn(m, n, k, a.value().data().data(), b.value().data().data(), out.data().data(), false);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, n, k](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      kernels::gemm_nt(m, k, n, g.data().data(), tape.value(b).data().data(), tape.grad_slot(a).data().data(),
                       true);
    }
    if (tape.requires_grad(b)) {
      kernels::gemm_tn(k, n, m, tape.value(a).data().data(), g.data().data(), tape.grad_slot(b).data().data(),
                       true);
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const auto [rows, in] = as_matrix(x.shape());
  const std::size_t out_dim = weight.shape()[0];
  if (weight.shape()[1] != in || bias.shape()[0] != out_dim) {
    throw DimensionError("linear: W " + shape_string(weight.shape()) + ", b " + shape_string(bias.shape()) +
                         ", x " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape().size() == 1 ? Shape{out_dim} : Shape{rows, out_dim};
  Tensor out(out_shape);
  double* y = out.data().data();
  kernels::gemm_nt(rows, out_dim, in, x.value().data().data(), weight.value().data().data(), y, false);
  const Tensor& b = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out_dim; ++j) y[r * out_dim + j] += b[j];
  return x.tape().record(std::move(out), {x, weight, bias},
                         [x, weight, bias, rows, in, out_dim](Tape& tape, const Tensor& g) {
                           if (tape.requires_grad(x)) {
                             kernels::gemm_nn(rows, in, out_dim, g.data().data(), tape.value(weight).data().data(),
                                              tape.grad_slot(x).data().data(), true);
                           }
                           if (tape.requires_grad(weight)) {
                             kernels::gemm_tn(out_dim, in, rows, g.data().data(), tape.value(x).data().data(),
                                              tape.grad_slot(weight).data().data(), true);
                           }
                           if (tape.requires_grad(bias)) {
                             Tensor& gb = tape.grad_slot(bias);
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
                           }
                         });
}

Var add_bias(const Var& x, const Var& bias) {
  require_rank(bias, 1, "add_bias bias");
  const auto [rows, cols] = as_matrix(x.shape());
  if (bias.shape()[0] != cols) throw DimensionError("add_bias: width mismatch");
  Tensor out = x.value();
  const Tensor& b = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] += b[j];
  return x.tape().record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape& tape, const Tensor& g) {
    tape.accumulate(x, g);
    if (tape.requires_grad(bias)) {
      Tensor& gb = tape.grad_slot(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) gb[j] += g[r * cols + j];
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out({c, r});
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return a.tape().record(std::move(out), {a}, [a, r, c](Tape& tape, const Tensor& g) {
    Tensor ga({r, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = g[j * r + i];
    tape.accumulate(a, ga);
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g.reshaped(tape.value(a).shape()));
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> indices) {
  require_rank(table, 2, "gather_rows");
  const std::size_t rows = table.shape()[0], width = table.shape()[1];
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  Tensor out({indices.size(), width});
  const Tensor& t = table.value();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) throw DimensionError("gather_rows: index out of range");
    std::copy_n(t.data().begin() + indices[r] * width, width, out.data().begin() + r * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record(std::move(out), {table}, [table, idx, width](Tape& tape, const Tensor& g) {
    Tensor& gt = tape.grad_slot(table);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < width; ++j) gt[idx[r] * width + j] += g[r * width + j];
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const auto [rows, cols] = as_matrix(a.shape());
  if (!(begin < end && end <= cols)) throw DimensionError("slice_cols: bad column range");
  const std::size_t w = end - begin;
  Shape shape = a.shape().size() == 1 ? Shape{w} : Shape{rows, w};
  Tensor out(shape);
  const Tensor& x = a.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x[r * cols + begin + j];
  return a.tape().record(std::move(out), {a}, [a, rows, cols, begin, w](Tape& tape, const Tensor& g) {
    Tensor& ga = tape.grad_slot(a);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) ga[r * cols + begin + j] += g[r * w + j];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const auto [ra, ca] = as_matrix(a.shape());
  const auto [rb, cb] = as_matrix(b.shape());
  if (ra != rb || a.shape().size() != b.shape().size()) throw DimensionError("concat_cols: row mismatch");
  const std::size_t w = ca + cb;
  Shape shape = a.shape().size() == 1 ? Shape{w} : Shape{ra, w};
  Tensor out(shape);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  for (std::size_t r = 0; r < ra; ++r) {
    for (std::size_t j = 0; j < ca; ++j) out[r * w + j] = x[r * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[r * w + ca + j] = y[r * cb + j];
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, ra, ca, cb, w](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      Tensor& ga = tape.grad_slot(a);
      for (std::size_t r = 0; r < ra; ++r)
        for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * w + j];
    }
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_slot(b);
      for (std::size_t r = 0; r < ra; ++r)
        for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * w + ca + j];
    }
  });
}

Var l2_normalize_rows(const Var& a) {
  const auto [rows, cols] = as_matrix(a.shape());
  const Tensor& x = a.value();
  Tensor out(a.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) ss += x[r * cols + j] * x[r * cols + j];
    const double nrm = std::sqrt(ss);
    if (!(nrm > 0.0)) throw NumericalError("l2_normalize_rows: zero row");
    norms[r] = nrm;
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = x[r * cols + j] / nrm;
  }
  auto y = std::make_shared<Tensor>(out);
  return a.tape().record(std::move(out), {a}, [a, y, norms, rows, cols](Tape& tape, const Tensor& g) {
    Tensor& ga = tape.grad_slot(a);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += (*y)[r * cols + j] * g[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j) {
        ga[r * cols + j] += (g[r * cols + j] - (*y)[r * cols + j] * dot) / norms[r];
      }
    }
  });
}

Var cross_entropy_rows(const Var& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy_rows");
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  if (targets.size() != rows) throw DimensionError("cross_entropy_rows: one target per row required");
  const Tensor& z = logits.value();
  auto probs = std::make_shared<Tensor>(Shape{rows, cols});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) throw DimensionError("cross_entropy_rows: target out of range");
    double mx = z[r * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, z[r * cols + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = std::exp(z[r * cols + j] - mx);
      (*probs)[r * cols + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < cols; ++j) (*probs)[r * cols + j] /= denom;
    total += -(z[r * cols + targets[r]] - mx - std::log(denom));
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return logits.tape().record(Tensor::scalar(total / static_cast<double>(rows)), {logits},
                              [logits, probs, tgt, rows, cols](Tape& tape, const Tensor& g) {
                                Tensor& gz = tape.grad_slot(logits);
                                const double s = g[0] / static_cast<double>(rows);
                                for (std::size_t r = 0; r < rows; ++r) {
                                  for (std::size_t j = 0; j < cols; ++j) {
                                    const double target = j == tgt[r] ? 1.0 : 0.0;
                                    gz[r * cols + j] += s * ((*probs)[r * cols + j] - target);
                                  }
                                }
                              });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  require_rank(bias, 1, "conv2d bias");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t co = ws[0], k = ws[2];
  if (ws[1] != c || ws[3] != k || bias.shape()[0] != co) {
    throw DimensionError("conv2d: weight " + shape_string(ws) + " incompatible with input " + shape_string(xs));
  }
  if (h + 2 * padding < k || w + 2 * padding < k || stride == 0) throw DimensionError("conv2d: kernel too large");
  ConvGeometry geo{c, h, w, k, stride, padding, (h + 2 * padding - k) / stride + 1, (w + 2 * padding - k) / stride + 1};
  const std::size_t patch = c * k * k;
  const std::size_t positions = geo.out_h * geo.out_w;
  auto cols = std::make_shared<std::vector<double>>(n * positions * patch);
  im2col(geo, n, x.value().data().data(), cols->data());
  std::vector<double> out_rows(n * positions * co);
  kernels::gemm_nt(n * positions, co, patch, cols->data(), weight.value().data().data(), out_rows.data(), false);
  const Tensor& b = bias.value();
  for (std::size_t r = 0; r < n * positions; ++r)
    for (std::size_t j = 0; j < co; ++j) out_rows[r * co + j] += b[j];
  Tensor out({n, co, geo.out_h, geo.out_w});
  rows_to_nchw(n, co, positions, out_rows.data(), out.data().data());
  return x.tape().record(
      std::move(out), {x, weight, bias}, [x, weight, bias, geo, cols, n, co, patch, positions](Tape& tape, const Tensor& g) {
        std::vector<double> grows(n * positions * co);
        nchw_to_rows(n, co, positions, g.data().data(), grows.data());
        if (tape.requires_grad(weight)) {
          kernels::gemm_tn(co, patch, n * positions, grows.data(), cols->data(), tape.grad_slot(weight).data().data(),
                           true);
        }
        if (tape.requires_grad(bias)) {
          Tensor& gb = tape.grad_slot(bias);
          for (std::size_t r = 0; r < n * positions; ++r)
            for (std::size_t j = 0; j < co; ++j) gb[j] += grows[r * co + j];
        }
        if (tape.requires_grad(x)) {
          std::vector<double> gcols(n * positions * patch);
          kernels::gemm_nn(n * positions, patch, co, grows.data(), tape.value(weight).data().data(), gcols.data(),
                           false);
          col2im(geo, n, gcols.data(), tape.grad_slot(x).data().data());
        }
      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "conv_transpose2d input");
  require_rank(weight, 4, "conv_transpose2d weight");
  require_rank(bias, 1, "conv_transpose2d bias");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t n = xs[0], ci = xs[1], h = xs[2], w = xs[3];
  const std::size_t co = ws[1], k = ws[2];
  if (ws[0] != ci || ws[3] != k || bias.shape()[0] != co || stride == 0) {
    throw DimensionError("conv_transpose2d: weight " + shape_string(ws) + " incompatible with input " +
                         shape_string(xs));
  }
  if ((h - 1) * stride + k <= 2 * padding || (w - 1) * stride + k <= 2 * padding) {
    throw DimensionError("conv_transpose2d: padding too large");
  }
  const std::size_t oh = (h - 1) * stride + k - 2 * padding;
  const std::size_t ow = (w - 1) * stride + k - 2 * padding;
  // The output plays the role of the image; the input grid is the patch grid.
  ConvGeometry geo{co, oh, ow, k, stride, padding, h, w};
  const std::size_t patch = co * k * k;
  const std::size_t positions = h * w;
  auto xrows = std::make_shared<std::vector<double>>(n * positions * ci);
  nchw_to_rows(n, ci, positions, x.value().data().data(), xrows->data());
  std::vector<double> cols(n * positions * patch);
  kernels::gemm_nn(n * positions, patch, ci, xrows->data(), weight.value().data().data(), cols.data(), false);
  Tensor out({n, co, oh, ow});
  col2im(geo, n, cols.data(), out.data().data());
  const Tensor& b = bias.value();
  for (std::size_t bn = 0; bn < n; ++bn)
    for (std::size_t ch = 0; ch < co; ++ch)
      for (std::size_t p = 0; p < oh * ow; ++p) out[(bn * co + ch) * oh * ow + p] += b[ch];
  return x.tape().record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, geo, xrows, n, ci, co, patch, positions, oh, ow](Tape& tape, const Tensor& g) {
        std::vector<double> gcols(n * positions * patch);
        im2col(geo, n, g.data().data(), gcols.data());
        if (tape.requires_grad(weight)) {
          kernels::gemm_tn(ci, patch, n * positions, xrows->data(), gcols.data(), tape.grad_slot(weight).data().data(),
                           true);
        }
        if (tape.requires_grad(bias)) {
          Tensor& gb = tape.grad_slot(bias);
          for (std::size_t bn = 0; bn < n; ++bn)
            for (std::size_t ch = 0; ch < co; ++ch)
              for (std::size_t p = 0; p < oh * ow; ++p) gb[ch] += g[(bn * co + ch) * oh * ow + p];
        }
        if (tape.requires_grad(x)) {
          std::vector<double> gx(n * positions * ci);
          kernels::gemm_nt(n * positions, ci, patch, gcols.data(), tape.value(weight).data().data(), gx.data(), false);
          std::vector<double> gnchw(n * positions * ci);
          rows_to_nchw(n, ci, positions, gx.data(), gnchw.data());
          Tensor& slot = tape.grad_slot(x);
          for (std::size_t i = 0; i < gnchw.size(); ++i) slot[i] += gnchw[i];
        }
      });
}

}  // namespace compgen::grad
