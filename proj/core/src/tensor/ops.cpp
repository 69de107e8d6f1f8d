#include "poet/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poet/error.hpp"

namespace poet {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

DType common_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    raise(ErrorKind::Contract, std::string(op) + ": mixed tensor dtypes");
  }
  return a.dtype();
}

bool is_suffix(std::span<const std::size_t> small, std::span<const std::size_t> big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct BroadcastPlan {
  std::vector<std::size_t> out_shape;
  std::size_t a_len = 0;
  std::size_t b_len = 0;
  std::size_t out_len = 0;
};

BroadcastPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  BroadcastPlan p;
  p.a_len = a.size();
  p.b_len = b.size();
  if (a.shape() == b.shape()) {
    p.out_shape = a.shape();
  } else if (p.b_len == 1) {
    p.out_shape = a.shape();
  } else if (p.a_len == 1) {
    p.out_shape = b.shape();
  } else if (is_suffix(b.shape(), a.shape())) {
    p.out_shape = a.shape();
  } else {
    raise(ErrorKind::Dimension, std::string(op) + ": incompatible shapes " +
                                    shape_string(a.shape()) + " and " +
                                    shape_string(b.shape()));
  }
  p.out_len = std::accumulate(p.out_shape.begin(), p.out_shape.end(),
                              std::size_t{1}, std::multiplies<>());
  return p;
}

inline std::size_t bcast_index(std::size_t i, std::size_t len, std::size_t out_len) {
  if (len == out_len) return i;
  if (len == 1) return 0;
  return i % len;
}

void maybe_record(const char* /*op*/, std::initializer_list<Tensor> inputs,
                  Tensor& out, std::function<void()> backward) {
  Tape* tape = Tape::active();
  if (!tape) return;
  bool needs = false;
  std::vector<std::uint64_t> ids;
  ids.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    needs = needs || t.requires_grad();
    ids.push_back(t.id());
  }
  if (!needs) return;
  out.set_requires_grad(true);
  tape->record(std::move(ids), out.impl(), std::move(backward));
}

template <typename F, typename DfA, typename DfB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, F f, DfA dfa,
                 DfB dfb) {
  DType dt = common_dtype(a, b, op);
  BroadcastPlan p = plan_broadcast(a, b, op);
  std::vector<double> out(p.out_len);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < p.out_len; ++i) {
    out[i] = f(av[bcast_index(i, p.a_len, p.out_len)],
               bv[bcast_index(i, p.b_len, p.out_len)]);
  }
  Tensor result = make_tensor(p.out_shape, std::move(out), false, dt);
  Impl ai = a.impl(), bi = b.impl(), oi = result.impl();
  maybe_record(op, {a, b}, result, [ai, bi, oi, p, dfa, dfb]() {
    const auto& g = oi->grad;
    if (ai->requires_grad) {
      std::vector<double> da(p.a_len, 0.0);
      for (std::size_t i = 0; i < p.out_len; ++i) {
        std::size_t ia = bcast_index(i, p.a_len, p.out_len);
        da[ia] += g[i] * dfa(ai->data[ia], bi->data[bcast_index(i, p.b_len, p.out_len)]);
      }
      accumulate_grad(ai, da);
    }
    if (bi->requires_grad) {
      std::vector<double> db(p.b_len, 0.0);
      for (std::size_t i = 0; i < p.out_len; ++i) {
        std::size_t ib = bcast_index(i, p.b_len, p.out_len);
        db[ib] += g[i] * dfb(ai->data[bcast_index(i, p.a_len, p.out_len)], bi->data[ib]);
      }
      accumulate_grad(bi, db);
    }
  });
  return result;
}

// Derivative as a function of input x and output y.
template <typename F, typename Df>
Tensor unary_op(const char* op, const Tensor& a, F f, Df df) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  Tensor result = make_tensor(a.shape(), std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record(op, {a}, result, [ai, oi, df]() {
    std::vector<double> da(ai->data.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
      da[i] = oi->grad[i] * df(ai->data[i], oi->data[i]);
    }
    accumulate_grad(ai, da);
  });
  return result;
}

struct AxisSpan {
  std::size_t outer, n, inner;
};

AxisSpan split_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    raise(ErrorKind::Axis, std::string(op) + ": axis " + std::to_string(axis) +
                               " out of range for shape " + shape_string(a.shape()));
  }
  AxisSpan s{1, a.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= a.shape()[i];
  for (std::size_t i = axis + 1; i < a.rank(); ++i) s.inner *= a.shape()[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  DType dt = common_dtype(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    raise(ErrorKind::Dimension, "matmul: inner dimensions mismatch: " +
                                    shape_string(a.shape()) + " x " +
                                    shape_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aik = av[i * k + p];
      if (aik == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor result = make_tensor({m, n}, std::move(out), false, dt);
  Impl ai = a.impl(), bi = b.impl(), oi = result.impl();
  maybe_record("matmul", {a, b}, result, [ai, bi, oi, m, k, n]() {
    const auto& g = oi->grad;
    if (ai->requires_grad) {  // dA = dC * B^T
      std::vector<double> da(m * k, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) da[i * k + p] += gij * bi->data[p * n + j];
        }
      }
      accumulate_grad(ai, da);
    }
    if (bi->requires_grad) {  // dB = A^T * dC
      std::vector<double> db(k * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double aip = ai->data[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * g[i * n + j];
        }
      }
      accumulate_grad(bi, db);
    }
  });
  return result;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) {
    raise(ErrorKind::Dimension,
          "transpose2d: expected rank-2 tensor, got " + shape_string(a.shape()));
  }
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  auto av = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  Tensor result = make_tensor({n, m}, std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("transpose2d", {a}, result, [ai, oi, m, n]() {
    std::vector<double> da(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) da[i * n + j] = oi->grad[j * m + i];
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor affine(const Tensor& a, double scale, double offset) {
  return unary_op(
      "affine", a, [scale, offset](double x) { return scale * x + offset; },
      [scale](double, double) { return scale; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor acos_clamped(const Tensor& a, double eps) {
  const double lo = -1.0 + eps, hi = 1.0 - eps;
  return unary_op(
      "acos_clamped", a,
      [lo, hi](double x) { return std::acos(std::clamp(x, lo, hi)); },
      [lo, hi](double x, double) {
        if (x <= lo || x >= hi) return 0.0;
        return -1.0 / std::sqrt(1.0 - x * x);
      });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  AxisSpan s = split_axis(a, axis, "softmax");
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) mx = std::max(mx, av[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        double e = std::exp(av[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < s.n; ++i) out[base + i * s.inner] /= z;
    }
  }
  Tensor result = make_tensor(a.shape(), std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("softmax", {a}, result, [ai, oi, s]() {
    std::vector<double> da(ai->data.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          std::size_t idx = base + i * s.inner;
          dot += oi->grad[idx] * oi->data[idx];
        }
        for (std::size_t i = 0; i < s.n; ++i) {
          std::size_t idx = base + i * s.inner;
          da[idx] = oi->data[idx] * (oi->grad[idx] - dot);
        }
      }
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor layernorm(const Tensor& a, std::size_t axis, double eps) {
  AxisSpan s = split_axis(a, axis, "layernorm");
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mean = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) mean += av[base + i * s.inner];
      mean /= static_cast<double>(s.n);
      double var = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        double d = av[base + i * s.inner] - mean;
        var += d * d;
      }
      var /= static_cast<double>(s.n);
      double rstd = 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < s.n; ++i) {
        out[base + i * s.inner] = (av[base + i * s.inner] - mean) * rstd;
      }
    }
  }
  Tensor result = make_tensor(a.shape(), std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("layernorm", {a}, result, [ai, oi, s, eps]() {
    std::vector<double> da(ai->data.size());
    const double n = static_cast<double>(s.n);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double mean = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) mean += ai->data[base + i * s.inner];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          double d = ai->data[base + i * s.inner] - mean;
          var += d * d;
        }
        var /= n;
        double rstd = 1.0 / std::sqrt(var + eps);
        double gmean = 0.0, gxmean = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          std::size_t idx = base + i * s.inner;
          gmean += oi->grad[idx];
          gxmean += oi->grad[idx] * oi->data[idx];
        }
        gmean /= n;
        gxmean /= n;
        for (std::size_t i = 0; i < s.n; ++i) {
          std::size_t idx = base + i * s.inner;
          da[idx] = rstd * (oi->grad[idx] - gmean - oi->data[idx] * gxmean);
        }
      }
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor result = make_tensor({1}, {total}, false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("sum", {a}, result, [ai, oi]() {
    std::vector<double> da(ai->data.size(), oi->grad[0]);
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor norm(const Tensor& a) {
  double sq = 0.0;
  for (double v : a.data()) sq += v * v;
  double n = std::sqrt(sq);
  Tensor result = make_tensor({1}, {n}, false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("norm", {a}, result, [ai, oi]() {
    std::vector<double> da(ai->data.size(), 0.0);
    double n = oi->data[0];
    if (n > 0.0) {
      double scale = oi->grad[0] / n;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] = scale * ai->data[i];
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                  std::multiplies<>());
  if (n != a.size()) {
    raise(ErrorKind::Dimension, "reshape: cannot view " + shape_string(a.shape()) +
                                    " as " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  Tensor result = make_tensor(std::move(shape), std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("reshape", {a}, result,
               [ai, oi]() { accumulate_grad(ai, oi->grad); });
  return result;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  AxisSpan s = split_axis(a, axis, "slice");
  if (len == 0 || start + len > s.n) {
    raise(ErrorKind::Dimension, "slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) +
                                    ") invalid for axis of size " + std::to_string(s.n));
  }
  std::vector<std::size_t> out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<double> out(s.outer * len * s.inner);
  auto av = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < len; ++i) {
      const double* src = &av[(o * s.n + start + i) * s.inner];
      double* dst = &out[(o * len + i) * s.inner];
      std::copy(src, src + s.inner, dst);
    }
  }
  Tensor result = make_tensor(std::move(out_shape), std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("slice", {a}, result, [ai, oi, s, start, len]() {
    std::vector<double> da(ai->data.size(), 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < len; ++i) {
        const double* src = &oi->grad[(o * len + i) * s.inner];
        double* dst = &da[(o * s.n + start + i) * s.inner];
        std::copy(src, src + s.inner, dst);
      }
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) {
    raise(ErrorKind::Input, "concat: empty tensor list");
  }
  const Tensor& first = parts[0];
  AxisSpan s0 = split_axis(first, axis, "concat");
  std::size_t total_axis = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != first.rank()) {
      raise(ErrorKind::Dimension, "concat: rank mismatch");
    }
    for (std::size_t d = 0; d < t.rank(); ++d) {
      if (d != axis && t.shape()[d] != first.shape()[d]) {
        raise(ErrorKind::Dimension, "concat: shape mismatch " +
                                        shape_string(first.shape()) + " vs " +
                                        shape_string(t.shape()));
      }
    }
    if (t.dtype() != first.dtype()) {
      raise(ErrorKind::Contract, "concat: mixed tensor dtypes");
    }
    total_axis += t.shape()[axis];
  }
  std::vector<std::size_t> out_shape = first.shape();
  out_shape[axis] = total_axis;
  std::vector<double> out(s0.outer * total_axis * s0.inner);
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    std::size_t n_t = t.shape()[axis];
    auto tv = t.data();
    for (std::size_t o = 0; o < s0.outer; ++o) {
      const double* src = &tv[o * n_t * s0.inner];
      double* dst = &out[(o * total_axis + offset) * s0.inner];
      std::copy(src, src + n_t * s0.inner, dst);
    }
    offset += n_t;
  }
  Tensor result = make_tensor(std::move(out_shape), std::move(out), false, first.dtype());

  Tape* tape = Tape::active();
  bool needs = false;
  std::vector<std::uint64_t> ids;
  for (const Tensor& t : parts) {
    needs = needs || t.requires_grad();
    ids.push_back(t.id());
  }
  if (tape && needs) {
    result.set_requires_grad(true);
    std::vector<Impl> impls;
    impls.reserve(parts.size());
    for (const Tensor& t : parts) impls.push_back(t.impl());
    Impl oi = result.impl();
    tape->record(std::move(ids), oi, [impls, oi, s0, total_axis]() {
      std::size_t offset = 0;
      for (const Impl& pi : impls) {
        std::size_t n_t = pi->data.size() / (s0.outer * s0.inner);
        if (pi->requires_grad) {
          std::vector<double> da(pi->data.size());
          for (std::size_t o = 0; o < s0.outer; ++o) {
            const double* src = &oi->grad[(o * total_axis + offset) * s0.inner];
            std::copy(src, src + n_t * s0.inner, &da[o * n_t * s0.inner]);
          }
          accumulate_grad(pi, da);
        }
        offset += n_t;
      }
    });
  }
  return result;
}

Tensor rows_scale(const Tensor& a, const Tensor& s) {
  if (a.rank() != 2 || s.rank() != 1 || s.shape()[0] != a.shape()[0]) {
    raise(ErrorKind::Dimension, "rows_scale: expected [m,n] and [m], got " +
                                    shape_string(a.shape()) + " and " +
                                    shape_string(s.shape()));
  }
  common_dtype(a, s, "rows_scale");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  auto av = a.data();
  auto sv = s.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * sv[i];
  }
  Tensor result = make_tensor({m, n}, std::move(out), false, a.dtype());
  Impl ai = a.impl(), si = s.impl(), oi = result.impl();
  maybe_record("rows_scale", {a, s}, result, [ai, si, oi, m, n]() {
    if (ai->requires_grad) {
      std::vector<double> da(m * n);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] = oi->grad[i * n + j] * si->data[i];
      }
      accumulate_grad(ai, da);
    }
    if (si->requires_grad) {
      std::vector<double> ds(m, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ds[i] += oi->grad[i * n + j] * ai->data[i * n + j];
      }
      accumulate_grad(si, ds);
    }
  });
  return result;
}

Tensor group_sum_rows(const Tensor& a, std::size_t group) {
  if (a.rank() != 2 || group == 0 || a.shape()[0] % group != 0) {
    raise(ErrorKind::Dimension, "group_sum_rows: rows of " + shape_string(a.shape()) +
                                    " not divisible into groups of " +
                                    std::to_string(group));
  }
  const std::size_t m = a.shape()[0] / group, n = a.shape()[1];
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t r = 0; r < group; ++r) {
      const double* src = &av[(g * group + r) * n];
      double* dst = &out[g * n];
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  }
  Tensor result = make_tensor({m, n}, std::move(out), false, a.dtype());
  Impl ai = a.impl(), oi = result.impl();
  maybe_record("group_sum_rows", {a}, result, [ai, oi, m, n, group]() {
    std::vector<double> da(ai->data.size());
    for (std::size_t g = 0; g < m; ++g) {
      for (std::size_t r = 0; r < group; ++r) {
        std::copy(&oi->grad[g * n], &oi->grad[g * n] + n, &da[(g * group + r) * n]);
      }
    }
    accumulate_grad(ai, da);
  });
  return result;
}

Tensor bilinear_sample(const Tensor& map, const Tensor& points) {
  if (map.rank() != 3) {
    raise(ErrorKind::Dimension,
          "bilinear_sample: map must be [C,H,W], got " + shape_string(map.shape()));
  }
  if (points.rank() != 2 || points.shape()[1] != 2) {
    raise(ErrorKind::Dimension, "bilinear_sample: points must be [P,2], got " +
                                    shape_string(points.shape()));
  }
  common_dtype(map, points, "bilinear_sample");
  const std::size_t C = map.shape()[0], H = map.shape()[1], W = map.shape()[2];
  const std::size_t P = points.shape()[0];
  auto mv = map.data();
  auto pv = points.data();

  struct Corner {
    std::size_t x0, x1, y0, y1;
    double fx, fy;
    bool sat_x, sat_y;
  };
  std::vector<Corner> corners(P);
  for (std::size_t p = 0; p < P; ++p) {
    double x = pv[2 * p], y = pv[2 * p + 1];
    if (!std::isfinite(x) || !std::isfinite(y)) {
      raise(ErrorKind::Input, "bilinear_sample: non-finite point at index " +
                                  std::to_string(p));
    }
    double gx = x * static_cast<double>(W) - 0.5;
    double gy = y * static_cast<double>(H) - 0.5;
    Corner c;
    c.sat_x = gx <= 0.0 || gx >= static_cast<double>(W - 1);
    c.sat_y = gy <= 0.0 || gy >= static_cast<double>(H - 1);
    gx = std::clamp(gx, 0.0, static_cast<double>(W - 1));
    gy = std::clamp(gy, 0.0, static_cast<double>(H - 1));
    c.x0 = static_cast<std::size_t>(gx);
    c.y0 = static_cast<std::size_t>(gy);
    c.x1 = std::min(c.x0 + 1, W - 1);
    c.y1 = std::min(c.y0 + 1, H - 1);
    c.fx = gx - static_cast<double>(c.x0);
    c.fy = gy - static_cast<double>(c.y0);
    corners[p] = c;
  }

  std::vector<double> out(P * C);
  for (std::size_t p = 0; p < P; ++p) {
    const Corner& c = corners[p];
    for (std::size_t ch = 0; ch < C; ++ch) {
      const double* plane = &mv[ch * H * W];
      double v00 = plane[c.y0 * W + c.x0];
      double v01 = plane[c.y0 * W + c.x1];
      double v10 = plane[c.y1 * W + c.x0];
      double v11 = plane[c.y1 * W + c.x1];
      out[p * C + ch] = (1.0 - c.fy) * ((1.0 - c.fx) * v00 + c.fx * v01) +
                        c.fy * ((1.0 - c.fx) * v10 + c.fx * v11);
    }
  }
  Tensor result = make_tensor({P, C}, std::move(out), false, map.dtype());
  Impl mi = map.impl(), pi = points.impl(), oi = result.impl();
  maybe_record("bilinear_sample", {map, points}, result,
               [mi, pi, oi, corners, C, H, W, P]() {
                 const auto& g = oi->grad;
                 if (mi->requires_grad) {
                   std::vector<double> dm(mi->data.size(), 0.0);
                   for (std::size_t p = 0; p < P; ++p) {
                     const Corner& c = corners[p];
                     for (std::size_t ch = 0; ch < C; ++ch) {
                       double gv = g[p * C + ch];
                       double* plane = &dm[ch * H * W];
                       plane[c.y0 * W + c.x0] += gv * (1.0 - c.fy) * (1.0 - c.fx);
                       plane[c.y0 * W + c.x1] += gv * (1.0 - c.fy) * c.fx;
                       plane[c.y1 * W + c.x0] += gv * c.fy * (1.0 - c.fx);
                       plane[c.y1 * W + c.x1] += gv * c.fy * c.fx;
                     }
                   }
                   accumulate_grad(mi, dm);
                 }
                 if (pi->requires_grad) {
                   std::vector<double> dp(pi->data.size(), 0.0);
                   for (std::size_t p = 0; p < P; ++p) {
                     const Corner& c = corners[p];
                     double dgx = 0.0, dgy = 0.0;
                     for (std::size_t ch = 0; ch < C; ++ch) {
                       const double* plane = &mi->data[ch * H * W];
                       double v00 = plane[c.y0 * W + c.x0];
                       double v01 = plane[c.y0 * W + c.x1];
                       double v10 = plane[c.y1 * W + c.x0];
                       double v11 = plane[c.y1 * W + c.x1];
                       double gv = g[p * C + ch];
                       dgx += gv * ((1.0 - c.fy) * (v01 - v00) + c.fy * (v11 - v10));
                       dgy += gv * ((1.0 - c.fx) * (v10 - v00) + c.fx * (v11 - v01));
                     }
                     if (!c.sat_x) dp[2 * p] = dgx * static_cast<double>(W);
                     if (!c.sat_y) dp[2 * p + 1] = dgy * static_cast<double>(H);
                   }
                   accumulate_grad(pi, dp);
                 }
               });
  return result;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  if (input.rank() != 3 || weight.rank() != 4 || bias.rank() != 1) {
    raise(ErrorKind::Dimension, "conv2d: expected input [Cin,H,W], weight "
                                "[Cout,Cin,kh,kw], bias [Cout]");
  }
  const std::size_t Cin = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
  const std::size_t Cout = weight.shape()[0], kh = weight.shape()[2],
                    kw = weight.shape()[3];
  if (weight.shape()[1] != Cin || bias.shape()[0] != Cout) {
    raise(ErrorKind::Dimension, "conv2d: channel mismatch between input " +
                                    shape_string(input.shape()) + " and weight " +
                                    shape_string(weight.shape()));
  }
  if (stride == 0 || H + 2 * pad < kh || W + 2 * pad < kw) {
    raise(ErrorKind::Dimension, "conv2d: kernel larger than padded input");
  }
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  std::vector<double> out(Cout * Ho * Wo, 0.0);
  auto xv = input.data();
  auto wv = weight.data();
  auto bv = bias.data();
  for (std::size_t oc = 0; oc < Cout; ++oc) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double acc = bv[oc];
        for (std::size_t ic = 0; ic < Cin; ++ic) {
          for (std::size_t u = 0; u < kh; ++u) {
            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + u) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t v = 0; v < kw; ++v) {
              std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + v) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += xv[(ic * H + iy) * W + ix] *
                     wv[((oc * Cin + ic) * kh + u) * kw + v];
            }
          }
        }
        out[(oc * Ho + oy) * Wo + ox] = acc;
      }
    }
  }
  Tensor result = make_tensor({Cout, Ho, Wo}, std::move(out), false, input.dtype());
  Impl xi = input.impl(), wi = weight.impl(), bi = bias.impl(), oi = result.impl();
  maybe_record("conv2d", {input, weight, bias}, result,
               [xi, wi, bi, oi, Cin, H, W, Cout, kh, kw, Ho, Wo, stride, pad]() {
                 const auto& g = oi->grad;
                 std::vector<double> dx(xi->requires_grad ? xi->data.size() : 0, 0.0);
                 std::vector<double> dw(wi->requires_grad ? wi->data.size() : 0, 0.0);
                 std::vector<double> db(bi->requires_grad ? bi->data.size() : 0, 0.0);
                 for (std::size_t oc = 0; oc < Cout; ++oc) {
                   for (std::size_t oy = 0; oy < Ho; ++oy) {
                     for (std::size_t ox = 0; ox < Wo; ++ox) {
                       double gv = g[(oc * Ho + oy) * Wo + ox];
                       if (gv == 0.0) continue;
                       if (!db.empty()) db[oc] += gv;
                       for (std::size_t ic = 0; ic < Cin; ++ic) {
                         for (std::size_t u = 0; u < kh; ++u) {
                           std::ptrdiff_t iy =
                               static_cast<std::ptrdiff_t>(oy * stride + u) -
                               static_cast<std::ptrdiff_t>(pad);
                           if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                           for (std::size_t v = 0; v < kw; ++v) {
                             std::ptrdiff_t ix =
                                 static_cast<std::ptrdiff_t>(ox * stride + v) -
                                 static_cast<std::ptrdiff_t>(pad);
                             if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                             std::size_t xidx = (ic * H + iy) * W + ix;
                             std::size_t widx = ((oc * Cin + ic) * kh + u) * kw + v;
                             if (!dx.empty()) dx[xidx] += gv * wi->data[widx];
                             if (!dw.empty()) dw[widx] += gv * xi->data[xidx];
                           }
                         }
                       }
                     }
                   }
                 }
                 if (!dx.empty()) accumulate_grad(xi, dx);
                 if (!dw.empty()) accumulate_grad(wi, dw);
                 if (!db.empty()) accumulate_grad(bi, db);
               });
  return result;
}

}  // namespace poet
