/*
 * Copyright 2026 The lightvad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lightvad/graph.hpp"

#include <algorithm>
#include <cmath>

#include "lightvad/errors.hpp"

namespace lightvad {

const Tensor& Var::value() const { return graph->node(id).value; }
const Tensor& Var::grad() const { return graph->node(id).grad; }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, nullptr, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, Tensor{}, true, &p, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::emit(Tensor value, std::initializer_list<Var> inputs, Backprop backprop) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.graph != this) throw DimensionError("graph: operand belongs to a different graph");
    needs = needs || nodes_[in.id].requires_grad;
  }
  if (!value.all_finite()) throw NumericError("graph: operation produced a non-finite value");
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, nullptr,
                        needs ? std::move(backprop) : Backprop{}});
  return Var{this, nodes_.size() - 1};
}

void Graph::backward(Var loss, double scale) {
  if (loss.graph != this) throw DimensionError("backward: loss belongs to a different graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         shape_to_string(nodes_[loss.id].value.shape()));
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor(n.value.shape(), 0.0);
  }
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad[0] = scale;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.backprop) n.backprop(*this, i);
  }
  for (auto& n : nodes_) {
    if (!n.param) continue;
    auto dst = n.param->grad.data();
    auto src = n.grad.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

double sigmoid_scalar(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace ops {
namespace {

bool wants(Graph& g, Var v) { return g.node(v.id).requires_grad; }

void require_same_shape(const char* op, Var a, Var b) {
  if (a.value().shape() != b.value().shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.value().shape()) + " vs " +
                         shape_to_string(b.value().shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return a.graph->emit(std::move(out), {a}, [a, deriv](Graph& g, std::size_t self) {
    const auto& n = g.node(self);
    auto& ga = g.node(a.id).grad;
    const auto& xv = g.node(a.id).value;
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += n.grad[i] * deriv(xv[i], n.value[i]);
  });
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(0) ||
      bv.dim(0) != wv.dim(1)) {
    throw DimensionError("linear: cannot apply weight " + shape_to_string(wv.shape()) +
                         " and bias " + shape_to_string(bv.shape()) + " to input " +
                         shape_to_string(xv.shape()));
  }
  const std::size_t n = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
  Tensor y({n, out});
  for (std::size_t r = 0; r < n; ++r) {
    double* yr = &y[r * out];
    for (std::size_t o = 0; o < out; ++o) yr[o] = bv[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xv[r * in + i];
      const double* wi = wv.data().data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
  Graph& g = *x.graph;
  return g.emit(std::move(y), {x, weight, bias}, [=](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    const Tensor& xv = g.node(x.id).value;
    const Tensor& wv = g.node(weight.id).value;
    if (wants(g, x)) {
      Tensor& gx = g.node(x.id).grad;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < in; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) acc += gy[r * out + o] * wv[i * out + o];
          gx[r * in + i] += acc;
        }
    }
    if (wants(g, weight)) {
      Tensor& gw = g.node(weight.id).grad;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = xv[r * in + i];
          for (std::size_t o = 0; o < out; ++o) gw[i * out + o] += xi * gy[r * out + o];
        }
    }
    if (wants(g, bias)) {
      Tensor& gb = g.node(bias.id).grad;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
    }
  });
}

Var conv1d_same(Var x, Var kernel, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  if (xv.rank() != 1 || kv.rank() != 1 || bias.value().size() != 1) {
    throw DimensionError("conv1d_same: expected 1-D input and kernel and a scalar bias, got " +
                         shape_to_string(xv.shape()) + " and " + shape_to_string(kv.shape()));
  }
  const std::size_t t = xv.size(), k = kv.size();
  if (k % 2 == 0 || k < 3 || k > t) {
    throw ConfigError("conv1d_same: kernel size " + std::to_string(k) +
                      " must be odd with 3 <= k <= T (T=" + std::to_string(t) + ")");
  }
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  const auto len = static_cast<std::ptrdiff_t>(t);
  Tensor y({t}, bias.value()[0]);
  for (std::ptrdiff_t i = 0; i < len; ++i)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
      const auto src = i + j - half;
      if (src >= 0 && src < len) y[i] += kv[j] * xv[src];
    }
  return x.graph->emit(std::move(y), {x, kernel, bias}, [=](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    const Tensor& xv = g.node(x.id).value;
    const Tensor& kv = g.node(kernel.id).value;
    const bool gx = wants(g, x), gk = wants(g, kernel);
    for (std::ptrdiff_t i = 0; i < len; ++i)
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
        const auto src = i + j - half;
        if (src < 0 || src >= len) continue;
        if (gx) g.node(x.id).grad[src] += gy[i] * kv[j];
        if (gk) g.node(kernel.id).grad[j] += gy[i] * xv[src];
      }
    if (wants(g, bias)) {
      double s = 0.0;
      for (std::size_t i = 0; i < t; ++i) s += gy[i];
      g.node(bias.id).grad[0] += s;
    }
  });
}

Var global_avg_pool(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) {
    throw DimensionError("global_avg_pool: expected [T x D], got " + shape_to_string(xv.shape()));
  }
  const std::size_t t = xv.dim(0), d = xv.dim(1);
  Tensor y({t});
  for (std::size_t r = 0; r < t; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += xv[r * d + c];
    y[r] = s / static_cast<double>(d);
  }
  return x.graph->emit(std::move(y), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    Tensor& gx = g.node(x.id).grad;
    const double inv = 1.0 / static_cast<double>(d);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += gy[r] * inv;
  });
}

Var leaky_relu(Var x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw ConfigError("leaky_relu: slope must lie in [0, 1), got " + std::to_string(slope));
  }
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return sigmoid_scalar(v); },
      [](double, double s) { return s * (1.0 - s); });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor& xv = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(xv.size());
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    // 53 random bits mapped onto [0, 1); identical on every platform.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < rate ? 0.0 : keep_scale;
    y[i] = xv[i] * mask[i];
  }
  return x.graph->emit(std::move(y), {x}, [x, mask = std::move(mask)](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    Tensor& gx = g.node(x.id).grad;
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += gy[i] * mask[i];
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return a.graph->emit(std::move(y), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    for (Var v : {a, b}) {
      if (!wants(g, v)) continue;
      Tensor& gv = g.node(v.id).grad;
      for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += gy[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return a.graph->emit(std::move(y), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    if (wants(g, a)) {
      Tensor& ga = g.node(a.id).grad;
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (wants(g, b)) {
      Tensor& gb = g.node(b.id).grad;
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.graph->emit(std::move(y), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    const Tensor& av = g.node(a.id).value;
    const Tensor& bv = g.node(b.id).value;
    if (wants(g, a)) {
      Tensor& ga = g.node(a.id).grad;
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (wants(g, b)) {
      Tensor& gb = g.node(b.id).grad;
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  return unary(
      a, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive argument " + std::to_string(v));
  }
  return unary(
      a, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var a) {
  return unary(
      a, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var row_scale(Var x, Var s) {
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (xv.rank() != 2 || sv.size() != xv.dim(0)) {
    throw DimensionError("row_scale: cannot scale " + shape_to_string(xv.shape()) + " by " +
                         shape_to_string(sv.shape()));
  }
  const std::size_t t = xv.dim(0), d = xv.dim(1);
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < d; ++c) y[r * d + c] = xv[r * d + c] * sv[r];
  return x.graph->emit(std::move(y), {x, s}, [=](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    const Tensor& xv = g.node(x.id).value;
    const Tensor& sv = g.node(s.id).value;
    const bool gx = wants(g, x), gs = wants(g, s);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t i = r * d + c;
        if (gx) g.node(x.id).grad[i] += gy[i] * sv[r];
        if (gs) g.node(s.id).grad[r] += gy[i] * xv[i];
      }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor y(std::move(shape), x.value().values());
  return x.graph->emit(std::move(y), {x}, [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    Tensor& gx = g.node(x.id).grad;
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

Var gather(Var x, std::span<const std::size_t> indices) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || indices.empty()) {
    throw DimensionError("gather: expected a 1-D input and at least one index");
  }
  Tensor y({indices.size()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) {
      throw DimensionError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                           shape_to_string(xv.shape()));
    }
    y[i] = xv[indices[i]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return x.graph->emit(std::move(y), {x}, [x, idx = std::move(idx)](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    Tensor& gx = g.node(x.id).grad;
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += gy[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph->emit(Tensor::scalar(s), {x}, [x](Graph& g, std::size_t self) {
    const double gy = g.node(self).grad[0];
    Tensor& gx = g.node(x.id).grad;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var max(Var x) {
  const auto data = x.value().data();
  // max_element returns the first of equal maxima.
  const auto arg = static_cast<std::size_t>(std::max_element(data.begin(), data.end()) - data.begin());
  return x.graph->emit(Tensor::scalar(data[arg]), {x}, [x, arg](Graph& g, std::size_t self) {
    g.node(x.id).grad[arg] += g.node(self).grad[0];
  });
}

Var adjacent_diff(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || xv.size() < 2) {
    throw DimensionError("adjacent_diff: need a 1-D input of length >= 2, got " +
                         shape_to_string(xv.shape()));
  }
  Tensor y({xv.size() - 1});
  for (std::size_t i = 0; i + 1 < xv.size(); ++i) y[i] = xv[i + 1] - xv[i];
  return x.graph->emit(std::move(y), {x}, [x](Graph& g, std::size_t self) {
    const Tensor& gy = g.node(self).grad;
    Tensor& gx = g.node(x.id).grad;
    for (std::size_t i = 0; i < gy.size(); ++i) {
      gx[i + 1] += gy[i];
      gx[i] -= gy[i];
    }
  });
}

}  // namespace ops

GradCheckReport grad_check(ParameterStore& store, const GraphBuilder& build, double eps,
                           double tol, double floor) {
  store.zero_grads();
  {
    Graph g;
    Var loss = build(g, store);
    g.backward(loss);
  }
  auto evaluate = [&](const Parameter& p, std::size_t i) {
    Graph g;
    double v = 0.0;
    try {
      v = build(g, store).value()[0];
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " while perturbing " + p.name + "[" + std::to_string(i) + "]");
    }
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: non-finite loss while perturbing " + p.name + "[" +
                         std::to_string(i) + "]");
    }
    return v;
  };

  GradCheckReport report;
  for (auto& p : store) {
    if (!p.grad.all_finite()) throw NumericError("grad_check: non-finite gradient in " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = evaluate(p, i);
      p.value[i] = saved - eps;
      const double down = evaluate(p, i);
      p.value[i] = saved;
      const double mid = evaluate(p, i);

      const double analytic = p.grad[i];
      auto rel_error = [&](double numeric) {
        return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      };
      double rel = rel_error((up - down) / (2.0 * eps));
      // A piecewise-linear activation switching branch inside [-eps, eps]
      // makes the two one-sided slopes disagree. The analytic gradient is
      // then the slope of one branch, so compare against the closer side.
      const double fwd = (up - mid) / eps;
      const double bwd = (mid - down) / eps;
      if (std::abs(fwd - bwd) > tol * std::max({std::abs(fwd), std::abs(bwd), floor})) {
        ++report.kinks;
        rel = std::min({rel, rel_error(fwd), rel_error(bwd)});
      }
      ++report.entries_checked;
      if (report.worst_parameter.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace lightvad
