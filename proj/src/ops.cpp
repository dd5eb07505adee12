#include "visaw/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visaw/errors.hpp"

namespace visaw {

namespace {

bool is_trailing_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

void require_broadcastable(const char* op, const Tensor& a, const Tensor& b) {
  if (!is_trailing_suffix(b.shape(), a.shape())) {
    fail(ErrorKind::Dimension, std::string(op) + ": shapes " + shape_str(a.shape()) +
                                   " and " + shape_str(b.shape()) + " do not align");
  }
}

bool track(const Tensor& a) { return grad_enabled() && a.requires_grad(); }
bool track(const Tensor& a, const Tensor& b) {
  return grad_enabled() && (a.requires_grad() || b.requires_grad());
}

// Elementwise unary op with y' expressed in terms of the output value.
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd f, Bwd dydx_from_y) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    std::vector<double> y = c.data();
    c.attach({a}, [pa, y = std::move(y), dydx_from_y](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx_from_y(y[i]);
    });
  }
  return c;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_broadcastable("add", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % bn];
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a, b)) {
    Tensor pa = a, pb = b;
    c.attach({a, b}, [pa, pb](const std::vector<double>& g) {
      if (pa.requires_grad()) {
        auto& ga = Tensor::grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (pb.requires_grad()) {
        auto& gb = Tensor::grad_slot(pb);
        const std::size_t bn = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i];
      }
    });
  }
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_broadcastable("sub", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i % bn];
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a, b)) {
    Tensor pa = a, pb = b;
    c.attach({a, b}, [pa, pb](const std::vector<double>& g) {
      if (pa.requires_grad()) {
        auto& ga = Tensor::grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (pb.requires_grad()) {
        auto& gb = Tensor::grad_slot(pb);
        const std::size_t bn = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] -= g[i];
      }
    });
  }
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_broadcastable("mul", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % bn];
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a, b)) {
    Tensor pa = a, pb = b;
    c.attach({a, b}, [pa, pb](const std::vector<double>& g) {
      const auto& av = pa.data();
      const auto& bv = pb.data();
      const std::size_t bn = bv.size();
      if (pa.requires_grad()) {
        auto& ga = Tensor::grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i % bn];
      }
      if (pb.requires_grad()) {
        auto& gb = Tensor::grad_slot(pb);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i] * av[i];
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& a, double s) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, s](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return c;
}

Tensor add_scalar(const Tensor& a, double s) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + s;
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return c;
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        // Split on sign so exp never overflows.
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::abs(av[i]);
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa](const std::vector<double>& g) {
      const auto& av = pa.data();
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
        ga[i] += g[i] * s;
      }
    });
  }
  return c;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    fail(ErrorKind::Dimension, "matmul: needs two rank-2 operands, got " +
                                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorKind::Dimension, "matmul: inner axes disagree, " + shape_str(a.shape()) +
                                   " vs " + shape_str(b.shape()));
  }
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + kk * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor c = Tensor::from_data({n, m}, std::move(out));
  if (track(a, b)) {
    Tensor pa = a, pb = b;
    c.attach({a, b}, [pa, pb, n, k, m](const std::vector<double>& g) {
      const auto& av = pa.data();
      const auto& bv = pb.data();
      if (pa.requires_grad()) {
        // dA = G * B^T
        auto& ga = Tensor::grad_slot(pa);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            const double* grow = g.data() + i * m;
            const double* brow = bv.data() + kk * m;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            ga[i * k + kk] += acc;
          }
        }
      }
      if (pb.requires_grad()) {
        // dB = A^T * G
        auto& gb = Tensor::grad_slot(pb);
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = g.data() + i * m;
          for (std::size_t kk = 0; kk < k; ++kk) {
            double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            double* gbrow = gb.data() + kk * m;
            for (std::size_t j = 0; j < m; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    fail(ErrorKind::Dimension, "transpose: needs a rank-2 operand, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(0), m = a.dim(1);
  const auto& av = a.data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = av[i * m + j];
  Tensor c = Tensor::from_data({m, n}, std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, n, m](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) ga[i * m + j] += g[j * n + i];
    });
  }
  return c;
}

Tensor softmax(const Tensor& a) {
  const std::size_t d = a.last_dim();
  const std::size_t rows = a.size() / d;
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * d;
    double* y = out.data() + r * d;
    double mx = x[0];
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(x[j])) {
        fail(ErrorKind::Numeric, "softmax: non-finite input at row " + std::to_string(r));
      }
      mx = std::max(mx, x[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < d; ++j) y[j] /= sum;
  }
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    std::vector<double> y = c.data();
    c.attach({a}, [pa, y = std::move(y), d, rows](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * d;
        const double* gr = g.data() + r * d;
        double inner = 0.0;
        for (std::size_t j = 0; j < d; ++j) inner += gr[j] * yr[j];
        double* gar = ga.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) gar[j] += yr[j] * (gr[j] - inner);
      }
    });
  }
  return c;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.last_dim();
  if (d < 2) {
    fail(ErrorKind::Contract, "layer_norm: last axis needs at least 2 entries, got " +
                                  shape_str(x.shape()));
  }
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    fail(ErrorKind::Dimension, "layer_norm: gain/bias must be [" + std::to_string(d) +
                                   "], got " + shape_str(gain.shape()) + " and " +
                                   shape_str(bias.shape()));
  }
  if (eps < 0.0) fail(ErrorKind::Config, "layer_norm: eps must be non-negative");
  const std::size_t rows = x.size() / d;
  const auto& xv = x.data();
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = xr[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (xr[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  Tensor c = Tensor::from_data(x.shape(), std::move(out));
  if (grad_enabled() && (x.requires_grad() || gain.requires_grad() || bias.requires_grad())) {
    Tensor px = x, pg = gain, pb = bias;
    c.attach({x, gain, bias}, [px, pg, pb, xhat = std::move(xhat),
                               inv_std = std::move(inv_std), d, rows](const std::vector<double>& g) {
      const auto& gv = pg.data();
      if (pg.requires_grad()) {
        auto& gg = Tensor::grad_slot(pg);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
      }
      if (pb.requires_grad()) {
        auto& gb = Tensor::grad_slot(pb);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
      }
      if (px.requires_grad()) {
        auto& gx = Tensor::grad_slot(px);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * d;
          const double* hr = xhat.data() + r * d;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double dh = gr[j] * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * hr[j];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double dh = gr[j] * gv[j];
            gx[r * d + j] += inv_std[r] * (dh - mean_dh - hr[j] * mean_dh_h);
          }
        }
      }
    });
  }
  return c;
}

Tensor sum_all(const Tensor& a) {
  const auto& av = a.data();
  double s = 0.0;
  for (double v : av) s += v;
  Tensor c = Tensor::scalar(s);
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
    });
  }
  return c;
}

Tensor mean_all(const Tensor& a) {
  const auto& av = a.data();
  double s = 0.0;
  for (double v : av) s += v;
  const double inv = 1.0 / static_cast<double>(av.size());
  Tensor c = Tensor::scalar(s * inv);
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, inv](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
    });
  }
  return c;
}

Tensor mean_rows(const Tensor& a) {
  if (a.rank() != 2) {
    fail(ErrorKind::Dimension, "mean_rows: needs a rank-2 operand, got " + shape_str(a.shape()));
  }
  const std::size_t r = a.dim(0), c0 = a.dim(1);
  const auto& av = a.data();
  std::vector<double> out(c0, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c0; ++j) out[j] += av[i * c0 + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (std::size_t j = 0; j < c0; ++j) out[j] *= inv;
  Tensor c = Tensor::from_data({c0}, std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, r, c0, inv](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c0; ++j) ga[i * c0 + j] += g[j] * inv;
    });
  }
  return c;
}

Tensor row(const Tensor& a, std::size_t index) {
  if (a.rank() != 2) {
    fail(ErrorKind::Dimension, "row: needs a rank-2 operand, got " + shape_str(a.shape()));
  }
  const std::size_t r = a.dim(0), c0 = a.dim(1);
  if (index >= r) {
    fail(ErrorKind::Dimension, "row: index " + std::to_string(index) + " out of range for " +
                                   shape_str(a.shape()));
  }
  const auto& av = a.data();
  std::vector<double> out(av.begin() + index * c0, av.begin() + (index + 1) * c0);
  Tensor c = Tensor::from_data({c0}, std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, index, c0](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t j = 0; j < c0; ++j) ga[index * c0 + j] += g[j];
    });
  }
  return c;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size()) {
    fail(ErrorKind::Dimension, "dot: needs two rank-1 operands of equal length, got " +
                                   shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto& av = a.data();
  const auto& bv = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  Tensor c = Tensor::scalar(s);
  if (track(a, b)) {
    Tensor pa = a, pb = b;
    c.attach({a, b}, [pa, pb](const std::vector<double>& g) {
      const auto& av = pa.data();
      const auto& bv = pb.data();
      if (pa.requires_grad()) {
        auto& ga = Tensor::grad_slot(pa);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * bv[i];
      }
      if (pb.requires_grad()) {
        auto& gb = Tensor::grad_slot(pb);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * av[i];
      }
    });
  }
  return c;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorKind::Contract, "concat_cols: no parts");
  const Shape& lead = parts[0].shape();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != lead.size() ||
        !std::equal(lead.begin(), lead.end() - 1, p.shape().begin())) {
      fail(ErrorKind::Dimension, "concat_cols: " + shape_str(p.shape()) +
                                     " does not align with " + shape_str(lead));
    }
    total += p.last_dim();
  }
  const std::size_t outer = parts[0].size() / parts[0].last_dim();
  Shape out_shape = lead;
  out_shape.back() = total;
  std::vector<double> out(outer * total);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.last_dim();
    const auto& pv = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < w; ++j) out[o * total + off + j] = pv[o * w + j];
    off += w;
  }
  Tensor c = Tensor::from_data(std::move(out_shape), std::move(out));
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (grad_enabled() && any) {
    std::vector<Tensor> ps = parts;
    c.attach(parts, [ps, outer, total](const std::vector<double>& g) {
      std::size_t off = 0;
      for (const Tensor& p : ps) {
        const std::size_t w = p.last_dim();
        if (p.requires_grad()) {
          auto& gp = Tensor::grad_slot(p);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < w; ++j) gp[o * w + j] += g[o * total + off + j];
        }
        off += w;
      }
    });
  }
  return c;
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
  const std::size_t d = a.last_dim();
  if (len == 0 || start + len > d) {
    fail(ErrorKind::Dimension, "slice_cols: [" + std::to_string(start) + ", " +
                                   std::to_string(start + len) + ") out of range for " +
                                   shape_str(a.shape()));
  }
  const std::size_t outer = a.size() / d;
  const auto& av = a.data();
  Shape out_shape = a.shape();
  out_shape.back() = len;
  std::vector<double> out(outer * len);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < len; ++j) out[o * len + j] = av[o * d + start + j];
  Tensor c = Tensor::from_data(std::move(out_shape), std::move(out));
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa, start, len, d, outer](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < len; ++j) ga[o * d + start + j] += g[o * len + j];
    });
  }
  return c;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    fail(ErrorKind::Dimension, "reshape: " + shape_str(a.shape()) + " does not fit " +
                                   shape_str(shape));
  }
  Tensor c = Tensor::from_data(std::move(shape), a.data());
  if (track(a)) {
    Tensor pa = a;
    c.attach({a}, [pa](const std::vector<double>& g) {
      auto& ga = Tensor::grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return c;
}

Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) {
    fail(ErrorKind::Dimension, "embedding_rows: table must be rank-2, got " +
                                   shape_str(table.shape()));
  }
  if (ids.empty()) fail(ErrorKind::Contract, "embedding_rows: empty id list");
  const std::size_t v = table.dim(0), d = table.dim(1);
  const auto& tv = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v) {
      fail(ErrorKind::Vocab, "embedding_rows: id " + std::to_string(ids[i]) +
                                 " outside table of " + std::to_string(v) + " rows");
    }
    std::copy_n(tv.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  Tensor c = Tensor::from_data({ids.size(), d}, std::move(out));
  if (track(table)) {
    Tensor pt = table;
    std::vector<std::size_t> idv = ids;
    c.attach({table}, [pt, idv = std::move(idv), d](const std::vector<double>& g) {
      auto& gt = Tensor::grad_slot(pt);
      for (std::size_t i = 0; i < idv.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) gt[idv[i] * d + j] += g[i * d + j];
    });
  }
  return c;
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 1) {
    fail(ErrorKind::Dimension, "l2_normalize: needs a rank-1 operand, got " + shape_str(v.shape()));
  }
  const auto& xv = v.data();
  double nsq = 0.0;
  for (double x : xv) nsq += x * x;
  double norm = std::sqrt(nsq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    fail(ErrorKind::Numeric, "l2_normalize: cannot normalize a zero or non-finite vector");
  }
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / norm;
  Tensor c = Tensor::from_data(v.shape(), std::move(out));
  if (track(v)) {
    Tensor pv = v;
    std::vector<double> y = c.data();
    c.attach({v}, [pv, y = std::move(y), norm](const std::vector<double>& g) {
      auto& gv = Tensor::grad_slot(pv);
      double inner = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += (g[i] - inner * y[i]) / norm;
    });
  }
  return c;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets,
                     const std::vector<std::uint8_t>* mask) {
  if (logits.rank() != 2) {
    fail(ErrorKind::Dimension, "cross_entropy: logits must be rank-2, got " +
                                   shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (targets.size() != n) {
    fail(ErrorKind::Dimension, "cross_entropy: " + std::to_string(targets.size()) +
                                   " targets for " + std::to_string(n) + " rows");
  }
  if (mask && mask->size() != n) {
    fail(ErrorKind::Dimension, "cross_entropy: mask length " + std::to_string(mask->size()) +
                                   " does not match " + std::to_string(n) + " rows");
  }
  const auto& lv = logits.data();
  std::vector<double> probs(n * k);
  double loss = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= k) {
      fail(ErrorKind::Vocab, "cross_entropy: target " + std::to_string(targets[i]) +
                                 " outside " + std::to_string(k) + " classes");
    }
    const double* x = lv.data() + i * k;
    double* p = probs.data() + i * k;
    double mx = x[0];
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
    if (!mask || (*mask)[i]) {
      loss += std::log(sum) + mx - x[targets[i]];
      ++counted;
    }
  }
  if (counted == 0) fail(ErrorKind::Contract, "cross_entropy: every row is masked out");
  loss /= static_cast<double>(counted);
  Tensor c = Tensor::scalar(loss);
  if (track(logits)) {
    Tensor pl = logits;
    std::vector<std::size_t> tv = targets;
    std::vector<std::uint8_t> mv = mask ? *mask : std::vector<std::uint8_t>(n, 1);
    c.attach({logits}, [pl, probs = std::move(probs), tv = std::move(tv), mv = std::move(mv),
                        n, k, counted](const std::vector<double>& g) {
      auto& gl = Tensor::grad_slot(pl);
      const double w = g[0] / static_cast<double>(counted);
      for (std::size_t i = 0; i < n; ++i) {
        if (!mv[i]) continue;
        for (std::size_t j = 0; j < k; ++j) {
          double delta = (j == tv[i]) ? 1.0 : 0.0;
          gl[i * k + j] += w * (probs[i * k + j] - delta);
        }
      }
    });
  }
  return c;
}

}  // namespace visaw
