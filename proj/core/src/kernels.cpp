#include "otjr/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "otjr/errors.hpp"

namespace otjr::kernels {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " +
                        to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* src = a.data();
  double* dst = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) dst[i] = f(src[i]);
  return out;
}

template <class F>
Tensor map_binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same_shape(op, a, b);
  Tensor out(a.shape());
  const double* x = a.data();
  const double* y = b.data();
  double* dst = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

std::size_t last_extent(const char* op, const Tensor& a) {
  if (a.rank() == 0) {
    throw ContractError(std::string(op) + ": needs rank >= 1");
  }
  return a.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary("add", a, b, [](double x, double y) { return x + y; });
}

void add_inplace(Tensor& acc, const Tensor& b) {
  require_same_shape("add", acc, b);
  double* dst = acc.data();
  const double* src = b.data();
  for (std::size_t i = 0, n = acc.size(); i < n; ++i) dst[i] += src[i];
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return map_binary("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double c) {
  return map_unary(a, [c](double x) { return c * x; });
}

Tensor scale_shift(const Tensor& a, double alpha, double beta) {
  return map_unary(a, [alpha, beta](double x) { return alpha * x + beta; });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ContractError("matmul: operands must be rank 2, got " +
                        to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t ka = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (ka != kb) {
    throw ContractError("matmul: inner dimensions differ " +
                        to_string(a.shape()) + (trans_a ? "^T" : "") + " x " +
                        to_string(b.shape()) + (trans_b ? "^T" : ""));
  }
  Tensor out(Shape{m, n});
  ConstMap ma(a.data(), static_cast<Eigen::Index>(a.rows()),
              static_cast<Eigen::Index>(a.cols()));
  ConstMap mb(b.data(), static_cast<Eigen::Index>(b.rows()),
              static_cast<Eigen::Index>(b.cols()));
  MutMap mc(out.data(), static_cast<Eigen::Index>(m),
            static_cast<Eigen::Index>(n));
  if (ka == 0) return out;
  if (!trans_a && !trans_b) {
    mc.noalias() = ma * mb;
  } else if (!trans_a && trans_b) {
    mc.noalias() = ma * mb.transpose();
  } else if (trans_a && !trans_b) {
    mc.noalias() = ma.transpose() * mb;
  } else {
    mc.noalias() = ma.transpose() * mb.transpose();
  }
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 ||
      x.cols() != w.cols() || w.rows() != b.size()) {
    throw ContractError("affine: incompatible shapes x" + to_string(x.shape()) +
                        " w" + to_string(w.shape()) + " b" +
                        to_string(b.shape()));
  }
  Tensor out = matmul(x, w, false, true);
  const std::size_t rows = out.rows();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += b[c];
  }
  return out;
}

Tensor relu(const Tensor& a) {
  return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor relu_mask(const Tensor& g, const Tensor& x) {
  return map_binary("relu_mask", g, x,
                    [](double gv, double xv) { return xv > 0.0 ? gv : 0.0; });
}

Tensor sign_mask(const Tensor& g, const Tensor& x) {
  return map_binary("sign_mask", g, x,
                    [](double gv, double xv) { return gv * sign(xv); });
}

Tensor softplus(const Tensor& a) {
  return map_unary(a, [](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
}

Tensor sigmoid(const Tensor& a) {
  return map_unary(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Tensor square(const Tensor& a) {
  return map_unary(a, [](double x) { return x * x; });
}

Tensor abs(const Tensor& a) {
  return map_unary(a, [](double x) { return std::fabs(x); });
}

Tensor reciprocal(const Tensor& a) {
  return map_unary(a, [](double x) { return x == 0.0 ? 0.0 : 1.0 / x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor::scalar(s);
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean: empty tensor");
  Tensor s = sum(a);
  s[0] /= static_cast<double>(a.size());
  return s;
}

Tensor inner(const Tensor& a, const Tensor& b) {
  require_same_shape("inner", a, b);
  double s = 0.0;
  for (std::size_t i = 0, n = a.size(); i < n; ++i) s += a[i] * b[i];
  return Tensor::scalar(s);
}

Tensor reduce_last(const Tensor& a) {
  const std::size_t n = last_extent("reduce_last", a);
  Tensor out(drop_last(a.shape()));
  for (std::size_t r = 0, rows = out.size(); r < rows; ++r) {
    double s = 0.0;
    const double* src = a.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) s += src[c];
    out[r] = s;
  }
  return out;
}

Tensor expand_last(const Tensor& a, std::size_t n) {
  Shape s = a.shape();
  s.push_back(n);
  Tensor out(s);
  for (std::size_t r = 0, rows = a.size(); r < rows; ++r) {
    std::fill_n(out.data() + r * n, n, a[r]);
  }
  return out;
}

Tensor reduce_first(const Tensor& a) {
  if (a.rank() == 0) throw ContractError("reduce_first: needs rank >= 1");
  Tensor out(Shape(a.shape().begin() + 1, a.shape().end()));
  const std::size_t inner_size = out.size();
  const std::size_t lead = a.shape()[0];
  for (std::size_t r = 0; r < lead; ++r) {
    const double* src = a.data() + r * inner_size;
    for (std::size_t c = 0; c < inner_size; ++c) out[c] += src[c];
  }
  return out;
}

Tensor expand_first(const Tensor& a, std::size_t n) {
  Shape s{n};
  s.insert(s.end(), a.shape().begin(), a.shape().end());
  Tensor out(s);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.data(), a.size(), out.data() + r * a.size());
  }
  return out;
}

Tensor expand_scalar(const Tensor& a, const Shape& shape) {
  return Tensor(shape, a.item());
}

Tensor logsumexp_last(const Tensor& a) {
  const std::size_t n = last_extent("logsumexp", a);
  if (n == 0) throw ContractError("logsumexp: empty last axis");
  Tensor out(drop_last(a.shape()));
  for (std::size_t r = 0, rows = out.size(); r < rows; ++r) {
    const double* src = a.data() + r * n;
    const double m = *std::max_element(src, src + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += std::exp(src[c] - m);
    out[r] = m + std::log(s);
  }
  return out;
}

Tensor softmax_last(const Tensor& a) {
  const std::size_t n = last_extent("softmax", a);
  if (n == 0) throw ContractError("softmax: empty last axis");
  Tensor out(a.shape());
  for (std::size_t r = 0, rows = a.size() / n; r < rows; ++r) {
    const double* src = a.data() + r * n;
    double* dst = out.data() + r * n;
    const double m = *std::max_element(src, src + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      dst[c] = std::exp(src[c] - m);
      s += dst[c];
    }
    for (std::size_t c = 0; c < n; ++c) dst[c] /= s;
  }
  return out;
}

Tensor cross_entropy_last(const Tensor& logits, const Tensor& targets) {
  require_same_shape("cross_entropy", logits, targets);
  const std::size_t n = last_extent("cross_entropy", logits);
  Tensor lse = logsumexp_last(logits);
  Tensor out(lse.shape());
  for (std::size_t r = 0, rows = out.size(); r < rows; ++r) {
    const double* z = logits.data() + r * n;
    const double* t = targets.data() + r * n;
    double mass = 0.0;
    double dot = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      mass += t[c];
      dot += t[c] * z[c];
    }
    out[r] = mass * lse[r] - dot;
  }
  return out;
}

Tensor l2norm_last(const Tensor& a) {
  const std::size_t n = last_extent("l2_norm", a);
  Tensor out(drop_last(a.shape()));
  for (std::size_t r = 0, rows = out.size(); r < rows; ++r) {
    const double* src = a.data() + r * n;
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += src[c] * src[c];
    out[r] = std::sqrt(s);
  }
  return out;
}

Tensor take(const Tensor& a, std::span<const std::size_t> index,
            const Shape& out_shape) {
  if (numel(out_shape) != index.size()) {
    throw ContractError("take: index count does not match output shape");
  }
  Tensor out(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.size()) throw ContractError("take: index out of range");
    out[i] = a[index[i]];
  }
  return out;
}

Tensor scatter_add(const Tensor& g, std::span<const std::size_t> index,
                   const Shape& out_shape) {
  if (g.size() != index.size()) {
    throw ContractError("scatter_add: index count does not match input");
  }
  Tensor out(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= out.size()) throw ContractError("scatter_add: index out of range");
    out[index[i]] += g[i];
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& a) {
  std::vector<int> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace otjr::kernels
