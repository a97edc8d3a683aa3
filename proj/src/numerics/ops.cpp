#include <algorithm>
#include <cmath>
#include <limits>

#include "clarigen/error.h"
#include "clarigen/numerics/graph.h"
#include "clarigen/simd/kernels.h"

namespace clarigen::numerics {
namespace {

const simd::KernelTable& K() { return simd::active(); }

void require_rank2(const Expr& e, const char* op) {
  if (e.shape().size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(e.shape()));
  }
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(const Expr& a, const Expr& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.value().size() == 1) return Broadcast::kRightScalar;
  if (a.value().size() == 1) return Broadcast::kLeftScalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

// Accumulate an output-shaped gradient into an input that may have been
// broadcast from a single value.
void accumulate(Graph& g, NodeId input, const Tensor& dout, const double* factor,
                double sign) {
  Tensor& target = g.grad_target(input);
  const std::size_t n = dout.size();
  if (target.size() == n) {
    if (factor == nullptr) {
      K().axpy(sign, dout.data(), target.data(), n);
    } else if (sign == 1.0) {
      K().mul_acc(dout.data(), factor, target.data(), n);
    } else {
      for (std::size_t i = 0; i < n; ++i) target[i] += sign * dout[i] * factor[i];
    }
    return;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += factor == nullptr ? dout[i] : dout[i] * factor[i];
  }
  target[0] += sign * s;
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(const Tensor& x, const char* op) {
  for (double v : x.values()) {
    if (std::isnan(v)) throw ContractError(std::string(op) + ": NaN input");
  }
}

}  // namespace

Expr matmul(Expr a, Expr b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ for " +
                         shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out({m, n});
  K().gemm_nn(m, k, n, a.value().data(), b.value().data(), out.data());
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [=](Graph& g, NodeId self) {
    const Tensor& dc = g.grad(self);
    if (g.needs_grad(ia)) {
      K().gemm_nt(m, n, k, dc.data(), g.value(ib).data(), g.grad_target(ia).data());
    }
    if (g.needs_grad(ib)) {
      K().gemm_tn(m, k, n, g.value(ia).data(), dc.data(), g.grad_target(ib).data());
    }
  });
}

Expr add(Expr a, Expr b) {
  const Broadcast bc = broadcast_kind(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(bc == Broadcast::kLeftScalar ? bv.shape() : av.shape());
  if (bc == Broadcast::kNone) {
    K().add(av.data(), bv.data(), out.data(), out.size());
  } else {
    const Tensor& big = bc == Broadcast::kLeftScalar ? bv : av;
    const double s = bc == Broadcast::kLeftScalar ? av[0] : bv[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = big[i] + s;
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g, ia, d, nullptr, 1.0);
    if (g.needs_grad(ib)) accumulate(g, ib, d, nullptr, 1.0);
  });
}

Expr sub(Expr a, Expr b) {
  const Broadcast bc = broadcast_kind(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(bc == Broadcast::kLeftScalar ? bv.shape() : av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = bc == Broadcast::kLeftScalar ? av[0] : av[i];
    const double y = bc == Broadcast::kRightScalar ? bv[0] : bv[i];
    out[i] = x - y;
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g, ia, d, nullptr, 1.0);
    if (g.needs_grad(ib)) accumulate(g, ib, d, nullptr, -1.0);
  });
}

Expr mul(Expr a, Expr b) {
  const Broadcast bc = broadcast_kind(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(bc == Broadcast::kLeftScalar ? bv.shape() : av.shape());
  if (bc == Broadcast::kNone) {
    K().mul(av.data(), bv.data(), out.data(), out.size());
  } else {
    const Tensor& big = bc == Broadcast::kLeftScalar ? bv : av;
    const double s = bc == Broadcast::kLeftScalar ? av[0] : bv[0];
    K().scale(s, big.data(), out.data(), out.size());
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const Tensor& x = g.value(ia);
    const Tensor& y = g.value(ib);
    auto expand = [&](const Tensor& t) {
      return t.size() == d.size() ? t : Tensor(d.shape(), t[0]);
    };
    if (g.needs_grad(ia)) {
      const Tensor f = expand(y);
      accumulate(g, ia, d, f.data(), 1.0);
    }
    if (g.needs_grad(ib)) {
      const Tensor f = expand(x);
      accumulate(g, ib, d, f.data(), 1.0);
    }
  });
}

Expr scale(Expr a, double factor) {
  Tensor out(a.shape());
  K().scale(factor, a.value().data(), out.data(), out.size());
  const NodeId ia = a.id();
  return a.graph().record(std::move(out), {a}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    K().axpy(factor, d.data(), g.grad_target(ia).data(), d.size());
  });
}

Expr tanh(Expr a) {
  Tensor out = map_values(a.value(), [](double x) { return std::tanh(x); });
  const NodeId ia = a.id();
  return a.graph().record(std::move(out), {a}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& t = g.grad_target(ia);
    for (std::size_t i = 0; i < d.size(); ++i) t[i] += d[i] * (1.0 - y[i] * y[i]);
  });
}

Expr sigmoid(Expr a) {
  Tensor out = map_values(a.value(), stable_sigmoid);
  const NodeId ia = a.id();
  return a.graph().record(std::move(out), {a}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& t = g.grad_target(ia);
    for (std::size_t i = 0; i < d.size(); ++i) t[i] += d[i] * y[i] * (1.0 - y[i]);
  });
}

Expr add_bias(Expr x, Expr bias) {
  require_rank2(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(x.shape()));
  }
  Tensor out({m, n});
  const double* b = bias.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    K().add(x.value().data() + r * n, b, out.data() + r * n, n);
  }
  const NodeId ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, bias}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(ix)) K().axpy(1.0, d.data(), g.grad_target(ix).data(), d.size());
    if (g.needs_grad(ib)) {
      Tensor& t = g.grad_target(ib);
      for (std::size_t r = 0; r < m; ++r) K().axpy(1.0, d.data() + r * n, t.data(), n);
    }
  });
}

namespace {

// Row-wise log-sum-exp over allowed columns (all columns when allowed is empty).
Tensor log_softmax_values(const Tensor& x, const std::vector<bool>& allowed) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (allowed.empty() || allowed[j]) mx = std::max(mx, row[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (allowed.empty() || allowed[j]) s += std::exp(row[j] - mx);
    }
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) {
      out[r * n + j] = (allowed.empty() || allowed[j])
                           ? row[j] - lse
                           : -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

Expr log_softmax_impl(Expr x, std::vector<bool> allowed) {
  require_rank2(x, "log_softmax_rows");
  check_finite(x.value(), "log_softmax_rows");
  if (!allowed.empty()) {
    if (allowed.size() != x.cols()) {
      throw DimensionError("log_softmax_rows_restricted: mask length mismatch");
    }
    if (std::none_of(allowed.begin(), allowed.end(), [](bool b) { return b; })) {
      throw ContractError("log_softmax_rows_restricted: no allowed column");
    }
  }
  Tensor out = log_softmax_values(x.value(), allowed);
  const NodeId ix = x.id();
  const std::size_t m = x.rows(), n = x.cols();
  return x.graph().record(
      std::move(out), {x}, [=, allowed = std::move(allowed)](Graph& g, NodeId self) {
        const Tensor& d = g.grad(self);
        const Tensor& y = g.value(self);
        Tensor& t = g.grad_target(ix);
        for (std::size_t r = 0; r < m; ++r) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (allowed.empty() || allowed[j]) s += d[r * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            if (!allowed.empty() && !allowed[j]) continue;
            t[r * n + j] += d[r * n + j] - std::exp(y[r * n + j]) * s;
          }
        }
      });
}

}  // namespace

Expr softmax_rows(Expr x) {
  require_rank2(x, "softmax_rows");
  check_finite(x.value(), "softmax_rows");
  Tensor out = log_softmax_values(x.value(), {});
  for (double& v : out.values()) v = std::exp(v);
  const NodeId ix = x.id();
  const std::size_t m = x.rows(), n = x.cols();
  return x.graph().record(std::move(out), {x}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& t = g.grad_target(ix);
    for (std::size_t r = 0; r < m; ++r) {
      const double s = K().dot(d.data() + r * n, y.data() + r * n, n);
      for (std::size_t j = 0; j < n; ++j) {
        t[r * n + j] += y[r * n + j] * (d[r * n + j] - s);
      }
    }
  });
}

Expr log_softmax_rows(Expr x) { return log_softmax_impl(x, {}); }

Expr log_softmax_rows_restricted(Expr x, const std::vector<bool>& allowed) {
  return log_softmax_impl(x, allowed);
}

Expr cross_entropy(Expr logits, std::span<const int> targets,
                   std::span<const double> mask) {
  require_rank2(logits, "cross_entropy");
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m || mask.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(m) +
                         " rows but " + std::to_string(targets.size()) +
                         " targets and " + std::to_string(mask.size()) + " mask entries");
  }
  check_finite(logits.value(), "cross_entropy");
  const Tensor logp = log_softmax_values(logits.value(), {});
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (mask[r] == 0.0) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= n) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside vocabulary of size " + std::to_string(n));
    }
    loss -= mask[r] * logp[r * n + static_cast<std::size_t>(targets[r])];
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> msk(mask.begin(), mask.end());
  const NodeId il = logits.id();
  return logits.graph().record(
      Tensor::scalar(loss), {logits},
      [=, tgt = std::move(tgt), msk = std::move(msk)](Graph& g, NodeId self) {
        const double d = g.grad(self)[0];
        const Tensor lp = log_softmax_values(g.value(il), {});
        Tensor& t = g.grad_target(il);
        for (std::size_t r = 0; r < m; ++r) {
          if (msk[r] == 0.0) continue;
          const double w = d * msk[r];
          for (std::size_t j = 0; j < n; ++j) t[r * n + j] += w * std::exp(lp[r * n + j]);
          t[r * n + static_cast<std::size_t>(tgt[r])] -= w;
        }
      });
}

Expr bce_with_logits(Expr logits, std::span<const double> labels) {
  const std::size_t m = logits.value().size();
  if (labels.size() != m) {
    throw DimensionError("bce_with_logits: " + std::to_string(m) + " logits but " +
                         std::to_string(labels.size()) + " labels");
  }
  const Tensor& x = logits.value();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double z = x[i];
    loss += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  std::vector<double> y(labels.begin(), labels.end());
  const NodeId il = logits.id();
  return logits.graph().record(
      Tensor::scalar(loss), {logits}, [=, y = std::move(y)](Graph& g, NodeId self) {
        const double d = g.grad(self)[0];
        const Tensor& z = g.value(il);
        Tensor& t = g.grad_target(il);
        for (std::size_t i = 0; i < m; ++i) t[i] += d * (stable_sigmoid(z[i]) - y[i]);
      });
}

Expr pick(Expr x, std::span<const int> index) {
  require_rank2(x, "pick");
  const std::size_t m = x.rows(), n = x.cols();
  if (index.size() != m) throw DimensionError("pick: index count mismatch");
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= n) {
      throw IndexError("pick: index " + std::to_string(index[r]) + " out of range");
    }
    out[r] = x.value()[r * n + static_cast<std::size_t>(index[r])];
  }
  std::vector<int> idx(index.begin(), index.end());
  const NodeId ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [=, idx = std::move(idx)](Graph& g, NodeId self) {
                            const Tensor& d = g.grad(self);
                            Tensor& t = g.grad_target(ix);
                            for (std::size_t r = 0; r < m; ++r) {
                              t[r * n + static_cast<std::size_t>(idx[r])] += d[r];
                            }
                          });
}

Expr sum(Expr x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const NodeId ix = x.id();
  return x.graph().record(Tensor::scalar(s), {x}, [=](Graph& g, NodeId self) {
    const double d = g.grad(self)[0];
    for (double& v : g.grad_target(ix).values()) v += d;
  });
}

Expr weighted_sum(Expr x, std::span<const double> weights) {
  const std::size_t m = x.value().size();
  if (weights.size() != m) throw DimensionError("weighted_sum: weight count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (weights[i] != 0.0) s += weights[i] * x.value()[i];
  }
  std::vector<double> w(weights.begin(), weights.end());
  const NodeId ix = x.id();
  return x.graph().record(Tensor::scalar(s), {x},
                          [=, w = std::move(w)](Graph& g, NodeId self) {
                            const double d = g.grad(self)[0];
                            Tensor& t = g.grad_target(ix);
                            for (std::size_t i = 0; i < m; ++i) t[i] += d * w[i];
                          });
}

Expr concat_cols(std::span<const Expr> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Expr& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(v.data() + r * widths[i], widths[i], out.data() + r * total + off);
    }
    off += widths[i];
  }
  std::vector<NodeId> ids;
  for (const Expr& p : parts) ids.push_back(p.id());
  return parts[0].graph().record(
      std::move(out), parts,
      [=, ids = std::move(ids), widths = std::move(widths)](Graph& g, NodeId self) {
        const Tensor& d = g.grad(self);
        std::size_t o = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (g.needs_grad(ids[i])) {
            Tensor& t = g.grad_target(ids[i]);
            for (std::size_t r = 0; r < m; ++r) {
              K().axpy(1.0, d.data() + r * total + o, t.data() + r * widths[i], widths[i]);
            }
          }
          o += widths[i];
        }
      });
}

Expr slice_cols(Expr x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.value().data() + r * n + begin, w, out.data() + r * w);
  }
  const NodeId ix = x.id();
  return x.graph().record(std::move(out), {x}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    Tensor& t = g.grad_target(ix);
    for (std::size_t r = 0; r < m; ++r) {
      K().axpy(1.0, d.data() + r * w, t.data() + r * n + begin, w);
    }
  });
}

Expr gather_rows(Expr table, std::span<const int> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t v = table.rows(), d = table.cols();
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      throw IndexError("token id " + std::to_string(ids[r]) +
                       " outside vocabulary of size " + std::to_string(v));
    }
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[r]) * d, d,
                out.data() + r * d);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  const NodeId it = table.id();
  return table.graph().record(
      std::move(out), {table}, [=, idv = std::move(idv)](Graph& g, NodeId self) {
        const Tensor& dg = g.grad(self);
        Tensor& t = g.grad_target(it);
        for (std::size_t r = 0; r < idv.size(); ++r) {
          K().axpy(1.0, dg.data() + r * d,
                   t.data() + static_cast<std::size_t>(idv[r]) * d, d);
        }
      });
}

Expr select_rows(const std::vector<bool>& take_first, Expr a, Expr b) {
  require_rank2(a, "select_rows");
  if (a.shape() != b.shape()) {
    throw DimensionError("select_rows: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols();
  if (take_first.size() != m) throw DimensionError("select_rows: mask length mismatch");
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    const Tensor& src = take_first[r] ? a.value() : b.value();
    std::copy_n(src.data() + r * n, n, out.data() + r * n);
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [=, sel = take_first](Graph& g, NodeId self) {
                            const Tensor& d = g.grad(self);
                            for (std::size_t r = 0; r < m; ++r) {
                              const NodeId target = sel[r] ? ia : ib;
                              if (!g.needs_grad(target)) continue;
                              K().axpy(1.0, d.data() + r * n,
                                       g.grad_target(target).data() + r * n, n);
                            }
                          });
}

Expr dropout(Expr x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (double& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep;
  Tensor out(x.shape());
  K().mul(x.value().data(), mask.data(), out.data(), out.size());
  const NodeId ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [=, mask = std::move(mask)](Graph& g, NodeId self) {
                            const Tensor& d = g.grad(self);
                            K().mul_acc(d.data(), mask.data(),
                                        g.grad_target(ix).data(), d.size());
                          });
}

Expr stack_steps(std::span<const Expr> steps) {
  if (steps.empty()) throw ContractError("stack_steps: no steps");
  require_rank2(steps[0], "stack_steps");
  const std::size_t b = steps[0].rows(), h = steps[0].cols(), n = steps.size();
  for (const Expr& s : steps) {
    if (s.shape() != steps[0].shape()) {
      throw DimensionError("stack_steps: step shapes differ");
    }
  }
  Tensor out({b, n, h});
  for (std::size_t t = 0; t < n; ++t) {
    const Tensor& v = steps[t].value();
    for (std::size_t r = 0; r < b; ++r) {
      std::copy_n(v.data() + r * h, h, out.data() + (r * n + t) * h);
    }
  }
  std::vector<NodeId> ids;
  for (const Expr& s : steps) ids.push_back(s.id());
  return steps[0].graph().record(
      std::move(out), steps, [=, ids = std::move(ids)](Graph& g, NodeId self) {
        const Tensor& d = g.grad(self);
        for (std::size_t t = 0; t < n; ++t) {
          if (!g.needs_grad(ids[t])) continue;
          Tensor& tg = g.grad_target(ids[t]);
          for (std::size_t r = 0; r < b; ++r) {
            K().axpy(1.0, d.data() + (r * n + t) * h, tg.data() + r * h, h);
          }
        }
      });
}

namespace {
void require_keys(const Expr& keys, std::size_t b, std::size_t h, const char* op) {
  const Shape& s = keys.shape();
  if (s.size() != 3 || s[0] != b || s[2] != h) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(b) + "xNx" +
                         std::to_string(h) + " values, got " + shape_string(s));
  }
}
}  // namespace

Expr batched_dot(Expr query, Expr keys) {
  require_rank2(query, "batched_dot");
  const std::size_t b = query.rows(), h = query.cols();
  require_keys(keys, b, h, "batched_dot");
  const std::size_t n = keys.shape()[1];
  Tensor out({b, n});
  const double* q = query.value().data();
  const double* k = keys.value().data();
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t t = 0; t < n; ++t) {
      out[r * n + t] = K().dot(q + r * h, k + (r * n + t) * h, h);
    }
  }
  const NodeId iq = query.id(), ik = keys.id();
  return query.graph().record(std::move(out), {query, keys}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const double* qv = g.value(iq).data();
    const double* kv = g.value(ik).data();
    if (g.needs_grad(iq)) {
      double* tq = g.grad_target(iq).data();
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t t = 0; t < n; ++t) {
          K().axpy(d[r * n + t], kv + (r * n + t) * h, tq + r * h, h);
        }
      }
    }
    if (g.needs_grad(ik)) {
      double* tk = g.grad_target(ik).data();
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t t = 0; t < n; ++t) {
          K().axpy(d[r * n + t], qv + r * h, tk + (r * n + t) * h, h);
        }
      }
    }
  });
}

Expr masked_softmax_rows(Expr x, std::span<const double> mask) {
  require_rank2(x, "masked_softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (mask.size() != m * n) throw DimensionError("masked_softmax_rows: mask size mismatch");
  check_finite(x.value(), "masked_softmax_rows");
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[r * n + j] != 0.0) {
        mx = std::max(mx, x.value()[r * n + j]);
        any = true;
      }
    }
    if (!any) {
      throw ContractError("masked_softmax_rows: row " + std::to_string(r) +
                          " has no unmasked position");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[r * n + j] == 0.0) continue;
      out[r * n + j] = std::exp(x.value()[r * n + j] - mx);
      s += out[r * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= s;
  }
  const NodeId ix = x.id();
  return x.graph().record(std::move(out), {x}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& t = g.grad_target(ix);
    for (std::size_t r = 0; r < m; ++r) {
      const double s = K().dot(d.data() + r * n, y.data() + r * n, n);
      for (std::size_t j = 0; j < n; ++j) {
        t[r * n + j] += y[r * n + j] * (d[r * n + j] - s);
      }
    }
  });
}

Expr batched_weighted_sum(Expr weights, Expr values) {
  require_rank2(weights, "batched_weighted_sum");
  const std::size_t b = weights.rows(), n = weights.cols();
  const Shape& vs = values.shape();
  if (vs.size() != 3 || vs[0] != b || vs[1] != n) {
    throw DimensionError("batched_weighted_sum: weights " + shape_string(weights.shape()) +
                         " do not match values " + shape_string(vs));
  }
  const std::size_t h = vs[2];
  Tensor out({b, h});
  const double* w = weights.value().data();
  const double* v = values.value().data();
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t t = 0; t < n; ++t) {
      if (w[r * n + t] == 0.0) continue;
      K().axpy(w[r * n + t], v + (r * n + t) * h, out.data() + r * h, h);
    }
  }
  const NodeId iw = weights.id(), iv = values.id();
  return weights.graph().record(std::move(out), {weights, values}, [=](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    const double* wv = g.value(iw).data();
    const double* vv = g.value(iv).data();
    if (g.needs_grad(iw)) {
      Tensor& tw = g.grad_target(iw);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t t = 0; t < n; ++t) {
          tw[r * n + t] += K().dot(d.data() + r * h, vv + (r * n + t) * h, h);
        }
      }
    }
    if (g.needs_grad(iv)) {
      double* tv = g.grad_target(iv).data();
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t t = 0; t < n; ++t) {
          if (wv[r * n + t] == 0.0) continue;
          K().axpy(wv[r * n + t], d.data() + r * h, tv + (r * n + t) * h, h);
        }
      }
    }
  });
}

}  // namespace clarigen::numerics
