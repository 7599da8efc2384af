#include "ctxemo/ops.hpp"

#include "ctxemo/exact_mean.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxemo::nd {

namespace {

using detail::make_result;
using detail::Node;

std::span<double> grad_of(const Tensor& t) { return t.node()->grad_buffer(); }
bool needs(const Tensor& t) { return t.defined() && t.requires_grad(); }

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + shape_str(t.shape()));
  }
}

// Shape of batch-norm style tensors: (outer=N, channels=C, inner=T*V).
struct ChannelLayout {
  std::size_t outer, channels, inner;
};

ChannelLayout channel_layout(const char* op, const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw std::invalid_argument(std::string(op) + ": expected (N,C) or (N,C,T,V), got " +
                                shape_str(x.shape()));
  }
  std::size_t inner = 1;
  for (std::size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
  return {x.dim(0), x.dim(1), inner};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [a, b](Node& self) {
    for (const Tensor* p : {&a, &b}) {
      if (!needs(*p)) continue;
      auto g = grad_of(*p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("sub", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [a, b](Node& self) {
    if (needs(a)) {
      auto g = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (needs(b)) {
      auto g = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("mul", a, b);
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](Node& self) {
    auto av = a.values();
    auto bv = b.values();
    if (needs(a)) {
      auto g = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (needs(b)) {
      auto g = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), "scale", {a}, [a, factor](Node& self) {
    auto g = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), "reshape", {a}, [a](Node& self) {
    auto g = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [a, b, m, k, n](Node& self) {
    auto av = a.values();
    auto bv = b.values();
    const auto& go = self.grad;
    if (needs(a)) {
      auto ga = grad_of(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (needs(b)) {
      auto gb = grad_of(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * go[i * n + j];
        }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  if (x.dim(1) != weight.dim(1)) mismatch("linear", x, weight);
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_dim}) mismatch("linear(bias)", weight, bias);
  std::vector<double> out(n * out_dim, 0.0);
  auto xv = x.values();
  auto wv = weight.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out_dim; ++o) {
      double s = bias.defined() ? bias.values()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) s += xv[r * in + i] * wv[o * in + i];
      out[r * out_dim + o] = s;
    }
  return make_result(
      {n, out_dim}, std::move(out), "linear", {x, weight, bias},
      [x, weight, bias, n, in, out_dim](Node& self) {
        auto xv = x.values();
        auto wv = weight.values();
        const auto& go = self.grad;
        if (needs(x)) {
          auto gx = grad_of(x);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double g = go[r * out_dim + o];
              for (std::size_t i = 0; i < in; ++i) gx[r * in + i] += g * wv[o * in + i];
            }
        }
        if (needs(weight)) {
          auto gw = grad_of(weight);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double g = go[r * out_dim + o];
              for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += g * xv[r * in + i];
            }
        }
        if (needs(bias)) {
          auto gb = grad_of(bias);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += go[r * out_dim + o];
        }
      });
}

Tensor conv1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("conv1x1", x, 4);
  require_rank("conv1x1", weight, 2);
  if (x.dim(1) != weight.dim(1)) mismatch("conv1x1", x, weight);
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
  const std::size_t plane = x.dim(2) * x.dim(3);
  if (bias.defined() && bias.shape() != Shape{cout}) mismatch("conv1x1(bias)", weight, bias);
  std::vector<double> out(n * cout * plane, 0.0);
  auto xv = x.values();
  auto wv = weight.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* dst = &out[(b * cout + o) * plane];
      if (bias.defined()) std::fill(dst, dst + plane, bias.values()[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double w = wv[o * cin + c];
        const double* src = &xv[(b * cin + c) * plane];
        for (std::size_t p = 0; p < plane; ++p) dst[p] += w * src[p];
      }
    }
  Shape shape{n, cout, x.dim(2), x.dim(3)};
  return make_result(
      std::move(shape), std::move(out), "conv1x1", {x, weight, bias},
      [x, weight, bias, n, cin, cout, plane](Node& self) {
        auto xv = x.values();
        auto wv = weight.values();
        const auto& go = self.grad;
        const bool gx_on = needs(x), gw_on = needs(weight);
        std::span<double> gx, gw;
        if (gx_on) gx = grad_of(x);
        if (gw_on) gw = grad_of(weight);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t o = 0; o < cout; ++o) {
            const double* g = &go[(b * cout + o) * plane];
            for (std::size_t c = 0; c < cin; ++c) {
              const std::size_t base = (b * cin + c) * plane;
              if (gx_on) {
                const double w = wv[o * cin + c];
                for (std::size_t p = 0; p < plane; ++p) gx[base + p] += w * g[p];
              }
              if (gw_on) {
                double s = 0.0;
                for (std::size_t p = 0; p < plane; ++p) s += g[p] * xv[base + p];
                gw[o * cin + c] += s;
              }
            }
          }
        if (needs(bias)) {
          auto gb = grad_of(bias);
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < cout; ++o) {
              const double* g = &go[(b * cout + o) * plane];
              double s = 0.0;
              for (std::size_t p = 0; p < plane; ++p) s += g[p];
              gb[o] += s;
            }
        }
      });
}

Tensor temporal_conv(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     std::size_t stride) {
  require_rank("temporal_conv", x, 4);
  require_rank("temporal_conv", weight, 3);
  if (x.dim(1) != weight.dim(1)) mismatch("temporal_conv", x, weight);
  const std::size_t kernel = weight.dim(2);
  if (kernel % 2 == 0) throw std::invalid_argument("temporal_conv: kernel size must be odd");
  if (stride == 0) throw std::invalid_argument("temporal_conv: stride must be positive");
  const std::size_t n = x.dim(0), cin = x.dim(1), t_in = x.dim(2), v = x.dim(3);
  const std::size_t cout = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{cout}) {
    mismatch("temporal_conv(bias)", weight, bias);
  }
  const std::size_t pad = (kernel - 1) / 2;
  const std::size_t t_out = (t_in + stride - 1) / stride;
  std::vector<double> out(n * cout * t_out * v, 0.0);
  auto xv = x.values();
  auto wv = weight.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* dst = &out[(b * cout + o) * t_out * v];
      if (bias.defined()) std::fill(dst, dst + t_out * v, bias.values()[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double* src = &xv[(b * cin + c) * t_in * v];
        for (std::size_t k = 0; k < kernel; ++k) {
          const double w = wv[(o * cin + c) * kernel + k];
          for (std::size_t to = 0; to < t_out; ++to) {
            const long long ti = static_cast<long long>(to * stride + k) -
                                 static_cast<long long>(pad);
            if (ti < 0 || ti >= static_cast<long long>(t_in)) continue;
            const double* s = src + static_cast<std::size_t>(ti) * v;
            double* d = dst + to * v;
            for (std::size_t j = 0; j < v; ++j) d[j] += w * s[j];
          }
        }
      }
    }
  Shape shape{n, cout, t_out, v};
  return make_result(
      std::move(shape), std::move(out), "temporal_conv", {x, weight, bias},
      [=](Node& self) {
        auto xv = x.values();
        auto wv = weight.values();
        const auto& go = self.grad;
        const bool gx_on = needs(x), gw_on = needs(weight);
        std::span<double> gx, gw;
        if (gx_on) gx = grad_of(x);
        if (gw_on) gw = grad_of(weight);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t o = 0; o < cout; ++o) {
            const double* g = &go[(b * cout + o) * t_out * v];
            for (std::size_t c = 0; c < cin; ++c) {
              const std::size_t base = (b * cin + c) * t_in * v;
              for (std::size_t k = 0; k < kernel; ++k) {
                const std::size_t widx = (o * cin + c) * kernel + k;
                const double w = wv[widx];
                double acc = 0.0;
                for (std::size_t to = 0; to < t_out; ++to) {
                  const long long ti = static_cast<long long>(to * stride + k) -
                                       static_cast<long long>(pad);
                  if (ti < 0 || ti >= static_cast<long long>(t_in)) continue;
                  const std::size_t off = base + static_cast<std::size_t>(ti) * v;
                  const double* gr = g + to * v;
                  if (gx_on)
                    for (std::size_t j = 0; j < v; ++j) gx[off + j] += w * gr[j];
                  if (gw_on)
                    for (std::size_t j = 0; j < v; ++j) acc += gr[j] * xv[off + j];
                }
                if (gw_on) gw[widx] += acc;
              }
            }
          }
        if (needs(bias)) {
          auto gb = grad_of(bias);
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < cout; ++o) {
              const double* g = &go[(b * cout + o) * t_out * v];
              double s = 0.0;
              for (std::size_t p = 0; p < t_out * v; ++p) s += g[p];
              gb[o] += s;
            }
        }
      });
}

Tensor graph_aggregate(const Tensor& x, const Tensor& adjacency) {
  require_rank("graph_aggregate", x, 4);
  require_rank("graph_aggregate", adjacency, 3);
  const std::size_t k_sub = adjacency.dim(0), vin = adjacency.dim(1), vout = adjacency.dim(2);
  if (x.dim(3) != vin || x.dim(1) % k_sub != 0) mismatch("graph_aggregate", x, adjacency);
  const std::size_t n = x.dim(0), c = x.dim(1) / k_sub, t = x.dim(2);
  std::vector<double> out(n * c * t * vout, 0.0);
  auto xv = x.values();
  auto av = adjacency.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < k_sub; ++k)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t tt = 0; tt < t; ++tt) {
          const double* xr = &xv[(((b * k_sub + k) * c + ch) * t + tt) * vin];
          double* orow = &out[((b * c + ch) * t + tt) * vout];
          for (std::size_t i = 0; i < vin; ++i) {
            const double xi = xr[i];
            if (xi == 0.0) continue;
            const double* arow = &av[(k * vin + i) * vout];
            for (std::size_t j = 0; j < vout; ++j) orow[j] += xi * arow[j];
          }
        }
  Shape shape{n, c, t, vout};
  return make_result(std::move(shape), std::move(out), "graph_aggregate", {x, adjacency},
                     [=](Node& self) {
                       auto xv = x.values();
                       auto av = adjacency.values();
                       const auto& go = self.grad;
                       const bool gx_on = needs(x), ga_on = needs(adjacency);
                       std::span<double> gx, ga;
                       if (gx_on) gx = grad_of(x);
                       if (ga_on) ga = grad_of(adjacency);
                       for (std::size_t b = 0; b < n; ++b)
                         for (std::size_t k = 0; k < k_sub; ++k)
                           for (std::size_t ch = 0; ch < c; ++ch)
                             for (std::size_t tt = 0; tt < t; ++tt) {
                               const std::size_t xoff =
                                   (((b * k_sub + k) * c + ch) * t + tt) * vin;
                               const double* grow = &go[((b * c + ch) * t + tt) * vout];
                               for (std::size_t i = 0; i < vin; ++i) {
                                 const std::size_t aoff = (k * vin + i) * vout;
                                 if (gx_on) {
                                   double s = 0.0;
                                   for (std::size_t j = 0; j < vout; ++j)
                                     s += grow[j] * av[aoff + j];
                                   gx[xoff + i] += s;
                                 }
                                 if (ga_on) {
                                   const double xi = xv[xoff + i];
                                   for (std::size_t j = 0; j < vout; ++j)
                                     ga[aoff + j] += xi * grow[j];
                                 }
                               }
                             }
                     });
}

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        BatchStats* stats) {
  const auto lay = channel_layout("batch_norm", x);
  if (gamma.shape() != Shape{lay.channels}) mismatch("batch_norm(gamma)", x, gamma);
  if (beta.shape() != Shape{lay.channels}) mismatch("batch_norm(beta)", x, beta);
  const std::size_t count = lay.outer * lay.inner;
  std::vector<double> mean(lay.channels, 0.0), var(lay.channels, 0.0);
  auto xv = x.values();
  for (std::size_t b = 0; b < lay.outer; ++b)
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const double* src = &xv[(b * lay.channels + c) * lay.inner];
      for (std::size_t p = 0; p < lay.inner; ++p) mean[c] += src[p];
    }
  for (auto& m : mean) m /= static_cast<double>(count);
  for (std::size_t b = 0; b < lay.outer; ++b)
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const double* src = &xv[(b * lay.channels + c) * lay.inner];
      for (std::size_t p = 0; p < lay.inner; ++p) {
        const double d = src[p] - mean[c];
        var[c] += d * d;
      }
    }
  for (auto& v : var) v /= static_cast<double>(count);

  std::vector<double> inv_std(lay.channels);
  for (std::size_t c = 0; c < lay.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  std::vector<double> xhat(x.numel()), out(x.numel());
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t b = 0; b < lay.outer; ++b)
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const std::size_t base = (b * lay.channels + c) * lay.inner;
      for (std::size_t p = 0; p < lay.inner; ++p) {
        const double h = (xv[base + p] - mean[c]) * inv_std[c];
        xhat[base + p] = h;
        out[base + p] = gv[c] * h + bv[c];
      }
    }
  if (stats) *stats = BatchStats{mean, var};
  return make_result(
      x.shape(), std::move(out), "batch_norm_train", {x, gamma, beta},
      [x, gamma, beta, lay, count, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        const auto& go = self.grad;
        std::vector<double> sum_g(lay.channels, 0.0), sum_gh(lay.channels, 0.0);
        for (std::size_t b = 0; b < lay.outer; ++b)
          for (std::size_t c = 0; c < lay.channels; ++c) {
            const std::size_t base = (b * lay.channels + c) * lay.inner;
            for (std::size_t p = 0; p < lay.inner; ++p) {
              sum_g[c] += go[base + p];
              sum_gh[c] += go[base + p] * xhat[base + p];
            }
          }
        if (needs(gamma)) {
          auto gg = grad_of(gamma);
          for (std::size_t c = 0; c < lay.channels; ++c) gg[c] += sum_gh[c];
        }
        if (needs(beta)) {
          auto gb = grad_of(beta);
          for (std::size_t c = 0; c < lay.channels; ++c) gb[c] += sum_g[c];
        }
        if (needs(x)) {
          auto gx = grad_of(x);
          auto gv = gamma.values();
          const double m = static_cast<double>(count);
          for (std::size_t b = 0; b < lay.outer; ++b)
            for (std::size_t c = 0; c < lay.channels; ++c) {
              const std::size_t base = (b * lay.channels + c) * lay.inner;
              const double k = gv[c] * inv_std[c] / m;
              for (std::size_t p = 0; p < lay.inner; ++p) {
                gx[base + p] +=
                    k * (m * go[base + p] - sum_g[c] - xhat[base + p] * sum_gh[c]);
              }
            }
        }
      });
}

Tensor batch_norm_fixed(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const std::vector<double>& mean, const std::vector<double>& var,
                        double eps) {
  const auto lay = channel_layout("batch_norm", x);
  if (gamma.shape() != Shape{lay.channels}) mismatch("batch_norm(gamma)", x, gamma);
  if (beta.shape() != Shape{lay.channels}) mismatch("batch_norm(beta)", x, beta);
  if (mean.size() != lay.channels || var.size() != lay.channels) {
    throw std::invalid_argument("batch_norm: running statistics have wrong width");
  }
  std::vector<double> inv_std(lay.channels);
  for (std::size_t c = 0; c < lay.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  std::vector<double> xhat(x.numel()), out(x.numel());
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t b = 0; b < lay.outer; ++b)
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const std::size_t base = (b * lay.channels + c) * lay.inner;
      for (std::size_t p = 0; p < lay.inner; ++p) {
        const double h = (xv[base + p] - mean[c]) * inv_std[c];
        xhat[base + p] = h;
        out[base + p] = gv[c] * h + bv[c];
      }
    }
  return make_result(x.shape(), std::move(out), "batch_norm_fixed", {x, gamma, beta},
                     [x, gamma, beta, lay, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](Node& self) {
                       const auto& go = self.grad;
                       auto gv = gamma.values();
                       const bool gx_on = needs(x), gg_on = needs(gamma), gb_on = needs(beta);
                       std::span<double> gx, gg, gb;
                       if (gx_on) gx = grad_of(x);
                       if (gg_on) gg = grad_of(gamma);
                       if (gb_on) gb = grad_of(beta);
                       for (std::size_t b = 0; b < lay.outer; ++b)
                         for (std::size_t c = 0; c < lay.channels; ++c) {
                           const std::size_t base = (b * lay.channels + c) * lay.inner;
                           for (std::size_t p = 0; p < lay.inner; ++p) {
                             const double g = go[base + p];
                             if (gx_on) gx[base + p] += g * gv[c] * inv_std[c];
                             if (gg_on) gg[c] += g * xhat[base + p];
                             if (gb_on) gb[c] += g;
                           }
                         }
                     });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), "relu", {x}, [x](Node& self) {
    auto xv = x.values();
    auto g = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = xv[i];
    if (z >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      out[i] = e / (1.0 + e);
    }
  }
  Tensor result = make_result(x.shape(), out, "sigmoid", {x}, [x, out](Node& self) {
    auto g = grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * out[i] * (1.0 - out[i]);
  });
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank("softmax_rows", x, 2);
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t r = 0; r < n; ++r) {
    const double* src = &xv[r * d];
    double* dst = &out[r * d];
    const double mx = *std::max_element(src, src + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = std::exp(src[j] - mx);
      total += dst[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[j] /= total;
  }
  return make_result(x.shape(), out, "softmax_rows", {x}, [x, out, n, d](Node& self) {
    auto g = grad_of(x);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += self.grad[r * d + j] * out[r * d + j];
      for (std::size_t j = 0; j < d; ++j)
        g[r * d + j] += out[r * d + j] * (self.grad[r * d + j] - dot);
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (plane == 0) throw std::invalid_argument("global_avg_pool: empty plane");
  std::vector<double> out(n * c, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += xv[i * plane + p];
    out[i] = s / static_cast<double>(plane);
  }
  return make_result({n, c}, std::move(out), "global_avg_pool", {x}, [x, n, c, plane](Node& self) {
    auto g = grad_of(x);
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < n * c; ++i)
      for (std::size_t p = 0; p < plane; ++p) g[i * plane + p] += self.grad[i] * inv;
  });
}

Tensor group_mean(const Tensor& x, std::size_t group) {
  require_rank("group_mean", x, 2);
  if (group == 0 || x.dim(0) % group != 0) {
    throw std::invalid_argument("group_mean: " + std::to_string(x.dim(0)) +
                                " rows do not split into groups of " + std::to_string(group));
  }
  const std::size_t n = x.dim(0) / group, d = x.dim(1);
  std::vector<double> out(n * d, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      MeanAccumulator acc;
      for (std::size_t k = 0; k < group; ++k) acc.add(xv[(r * group + k) * d + j]);
      out[r * d + j] = acc.mean();
    }
  return make_result({n, d}, std::move(out), "group_mean", {x}, [x, n, d, group](Node& self) {
    auto g = grad_of(x);
    const double inv = 1.0 / static_cast<double>(group);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < group; ++k)
        for (std::size_t j = 0; j < d; ++j) g[(r * group + k) * d + j] += self.grad[r * d + j] * inv;
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  const std::size_t n = parts.front().dim(0);
  std::size_t width = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.dim(0) != n) mismatch("concat_cols", parts.front(), p);
    width += p.dim(1);
  }
  std::vector<double> out(n * width);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t d = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(&pv[r * d], d, &out[r * width + col]);
    col += d;
  }
  return make_result({n, width}, std::move(out), "concat_cols", parts,
                     [parts, n, width](Node& self) {
                       std::size_t col = 0;
                       for (const auto& p : parts) {
                         const std::size_t d = p.dim(1);
                         if (needs(p)) {
                           auto g = grad_of(p);
                           for (std::size_t r = 0; r < n; ++r)
                             for (std::size_t j = 0; j < d; ++j)
                               g[r * d + j] += self.grad[r * width + col + j];
                         }
                         col += d;
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank("slice_cols", x, 2);
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (start + count > d) {
    throw std::invalid_argument("slice_cols: columns [" + std::to_string(start) + "," +
                                std::to_string(start + count) + ") exceed shape " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(n * count);
  auto xv = x.values();
  for (std::size_t r = 0; r < n; ++r) std::copy_n(&xv[r * d + start], count, &out[r * count]);
  return make_result({n, count}, std::move(out), "slice_cols", {x},
                     [x, n, d, start, count](Node& self) {
                       auto g = grad_of(x);
                       for (std::size_t r = 0; r < n; ++r)
                         for (std::size_t j = 0; j < count; ++j)
                           g[r * d + start + j] += self.grad[r * count + j];
                     });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (p == 0.0) return x;
  std::vector<double> mask(x.numel());
  const double keep = 1.0 / (1.0 - p);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1}, {s}, "sum", {x}, [x](Node& self) {
    auto g = grad_of(x);
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("mse", a, b);
  const auto d = sub(a, b);
  return mean(mul(d, d));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) mismatch("bce_with_logits", logits, targets);
  const std::size_t count = logits.numel();
  if (count == 0) throw std::invalid_argument("bce_with_logits: empty input");
  auto xv = logits.values();
  auto yv = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = xv[i];
    total += std::max(x, 0.0) - x * yv[i] + std::log1p(std::exp(-std::abs(x)));
  }
  total /= static_cast<double>(count);
  return make_result({1}, {total}, "bce_with_logits", {logits, targets},
                     [logits, targets, count](Node& self) {
                       auto xv = logits.values();
                       auto yv = targets.values();
                       const double g0 = self.grad[0] / static_cast<double>(count);
                       if (needs(logits)) {
                         auto g = grad_of(logits);
                         for (std::size_t i = 0; i < count; ++i) {
                           const double x = xv[i];
                           const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                                      : std::exp(x) / (1.0 + std::exp(x));
                           g[i] += g0 * (s - yv[i]);
                         }
                       }
                       if (needs(targets)) {
                         auto g = grad_of(targets);
                         for (std::size_t i = 0; i < count; ++i) g[i] -= g0 * xv[i];
                       }
                     });
}

}  // namespace ctxemo::nd
