#include "vaebench/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t) { return ConstMatrixMap(t.data().data(), t.rows(), t.cols()); }
MatrixMap as_matrix(Tensor& t) { return MatrixMap(t.data().data(), t.rows(), t.cols()); }

void accumulate(Tensor* dst, const Tensor& src) {
  if (!dst) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <class F>
Var unary(Var a, F&& f, Tape::BackwardFn backward) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return a.tape().record(std::move(out), {a.id()}, std::move(backward));
}

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (a.is_scalar()) return Broadcast::left_scalar;
  if (b.is_scalar()) return Broadcast::right_scalar;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

// Reduces a full-size adjoint into a single-element slot when the operand was broadcast.
void accumulate_maybe_reduced(Tensor* dst, const Tensor& full, bool reduce) {
  if (!dst) return;
  if (!reduce) {
    accumulate(dst, full);
    return;
  }
  double s = 0.0;
  for (double v : full.data()) s += v;
  (*dst)[0] += s;
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  if (!p.frozen) {
    n.parameter = &p;
    n.requires_grad = true;
    n.is_leaf = true;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (NodeId id : inputs) {
    if (id >= nodes_.size()) throw ContractError("tape input recorded after its consumer");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

GradientMap Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));

  std::vector<std::optional<Tensor>> adjoint(loss.id() + 1);
  adjoint[loss.id()] = Tensor(lv.shape(), 1.0);

  GradientMap grads;
  std::vector<Tensor*> slots;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !adjoint[id]) continue;
    if (node.is_leaf) {
      if (node.parameter) {
        Parameter& p = *node.parameter;
        if (p.grad.shape() != p.value.shape()) p.zero_grad();
        accumulate(&p.grad, *adjoint[id]);
        adjoint[id].reset();
        continue;
      }
      grads.emplace(id, std::move(*adjoint[id]));
      adjoint[id].reset();
      continue;
    }
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const NodeId in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (Parameter* p = nodes_[in].parameter) {
        if (p->grad.shape() != p->value.shape()) p->zero_grad();
        slots[k] = &p->grad;
        continue;
      }
      if (!adjoint[in]) adjoint[in] = Tensor(value(in).shape());
      slots[k] = &*adjoint[in];
    }
    node.backward(*this, *adjoint[id], slots);
    adjoint[id].reset();
  }
  return grads;
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast mode = classify(x, y, "add");
  Tensor out(mode == Broadcast::left_scalar ? y.shape() : x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[mode == Broadcast::left_scalar ? 0 : i] + y[mode == Broadcast::right_scalar ? 0 : i];
  }
  return tape.record(std::move(out), {a.id(), b.id()},
                     [mode](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                       accumulate_maybe_reduced(gi[0], g, mode == Broadcast::left_scalar);
                       accumulate_maybe_reduced(gi[1], g, mode == Broadcast::right_scalar);
                     });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast mode = classify(x, y, "mul");
  Tensor out(mode == Broadcast::left_scalar ? y.shape() : x.shape());
  auto o = out.data();
  const bool ls = mode == Broadcast::left_scalar;
  const bool rs = mode == Broadcast::right_scalar;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[ls ? 0 : i] * y[rs ? 0 : i];
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib, ls, rs](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& xv = t.value(ia);
                       const Tensor& yv = t.value(ib);
                       if (gi[0]) {
                         Tensor d(g.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * yv[rs ? 0 : i];
                         accumulate_maybe_reduced(gi[0], d, ls);
                       }
                       if (gi[1]) {
                         Tensor d(g.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * xv[ls ? 0 : i];
                         accumulate_maybe_reduced(gi[1], d, rs);
                       }
                     });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  return unary(a, [factor](double v) { return factor * v; },
               [factor](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * g[i];
               });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double v) { return v + offset; },
               [](const Tape&, const Tensor& g, std::span<Tensor* const> gi) { accumulate(gi[0], g); });
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  Tensor out(Shape{x.rows(), y.cols()});
  as_matrix(out).noalias() = as_matrix(x) * as_matrix(y);
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) as_matrix(*gi[0]).noalias() += as_matrix(g) * as_matrix(t.value(ib)).transpose();
                       if (gi[1]) as_matrix(*gi[1]).noalias() += as_matrix(t.value(ia)).transpose() * as_matrix(g);
                     });
}

Var affine(Var x, Var weight, Var bias) {
  Tape& tape = same_tape(x, weight);
  same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  if (xv.rank() != 2 || w.rank() != 2 || xv.cols() != w.rows() || b.size() != w.cols()) {
    throw DimensionError("affine: shape mismatch " + shape_string(xv.shape()) + " x " + shape_string(w.shape()) +
                         " + " + shape_string(b.shape()));
  }
  Tensor out(Shape{xv.rows(), w.cols()});
  auto om = as_matrix(out);
  om.noalias() = as_matrix(xv) * as_matrix(w);
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), b.size());
  const NodeId ix = x.id(), iw = weight.id();
  return tape.record(std::move(out), {ix, iw, bias.id()},
                     [ix, iw](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                       const auto gm = as_matrix(g);
                       if (gi[0]) as_matrix(*gi[0]).noalias() += gm * as_matrix(t.value(iw)).transpose();
                       if (gi[1]) as_matrix(*gi[1]).noalias() += as_matrix(t.value(ix)).transpose() * gm;
                       if (gi[2]) {
                         Eigen::Map<Eigen::RowVectorXd>(gi[2]->data().data(), gi[2]->size()) += gm.colwise().sum();
                       }
                     });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a.id()},
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                           const double gv = g[0];
                           for (double& d : gi[0]->data()) d += gv;
                         });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out(Shape{r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x[i * c + j];
    out[i] = s;
  }
  return a.tape().record(std::move(out), {a.id()},
                         [c](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                           auto d = gi[0]->data();
                           for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i / c];
                         });
}

Var exp(Var a) {
  const NodeId ia = a.id();
  return unary(a, [](double v) { return std::exp(v); },
               [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * std::exp(x[i]);
               });
}

Var log(Var a) {
  const NodeId ia = a.id();
  return unary(a, [](double v) { return std::log(v); },
               [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] / x[i];
               });
}

Var relu(Var a) {
  const NodeId ia = a.id();
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; },
               [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += x[i] > 0.0 ? g[i] : 0.0;
               });
}

Var sigmoid(Var a) {
  const NodeId ia = a.id();
  return unary(a,
               [](double v) {
                 return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
               },
               [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) {
                   const double v = x[i];
                   const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
                   d[i] += g[i] * s * (1.0 - s);
                 }
               });
}

Var square(Var a) {
  const NodeId ia = a.id();
  return unary(a, [](double v) { return v * v; },
               [ia](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * x[i] * g[i];
               });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  const NodeId ia = a.id();
  return unary(a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [ia, lo, hi](const Tape& t, const Tensor& g, std::span<Tensor* const> gi) {
                 const Tensor& x = t.value(ia);
                 auto d = gi[0]->data();
                 for (std::size_t i = 0; i < d.size(); ++i) {
                   if (x[i] >= lo && x[i] <= hi) d[i] += g[i];
                 }
               });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a.id()},
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                           auto d = gi[0]->data();
                           for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                         });
}

Var concat(Var a, Var b, std::size_t axis) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || axis > 1 || (axis == 1 && x.rows() != y.rows()) ||
      (axis == 0 && x.cols() != y.cols())) {
    throw DimensionError("concat: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  if (axis == 0) {
    std::vector<double> data(x.data().begin(), x.data().end());
    data.insert(data.end(), y.data().begin(), y.data().end());
    const std::size_t split = x.size();
    return tape.record(Tensor(Shape{x.rows() + y.rows(), x.cols()}, std::move(data)), {a.id(), b.id()},
                       [split](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                         if (gi[0]) for (std::size_t i = 0; i < split; ++i) (*gi[0])[i] += g[i];
                         if (gi[1]) for (std::size_t i = split; i < g.size(); ++i) (*gi[1])[i - split] += g[i];
                       });
  }
  const std::size_t r = x.rows(), ca = x.cols(), cb = y.cols();
  Tensor out(Shape{r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(&x[i * ca], ca, &out[i * (ca + cb)]);
    std::copy_n(&y[i * cb], cb, &out[i * (ca + cb) + ca]);
  }
  return tape.record(std::move(out), {a.id(), b.id()},
                     [r, ca, cb](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                       for (std::size_t i = 0; i < r; ++i) {
                         if (gi[0]) for (std::size_t j = 0; j < ca; ++j) (*gi[0])[i * ca + j] += g[i * (ca + cb) + j];
                         if (gi[1]) for (std::size_t j = 0; j < cb; ++j) (*gi[1])[i * cb + j] += g[i * (ca + cb) + ca + j];
                       }
                     });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  if (begin > end || end > c) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside shape " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{r, w});
  for (std::size_t i = 0; i < r; ++i) std::copy_n(&x[i * c + begin], w, &out[i * w]);
  return a.tape().record(std::move(out), {a.id()},
                         [r, c, w, begin](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < w; ++j) (*gi[0])[i * c + begin + j] += g[i * w + j];
                         });
}

Var index_select(Var table, std::span<const std::size_t> rows) {
  const Tensor& t = table.value();
  const std::size_t n = t.rows(), c = t.cols();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out(Shape{idx.size(), c});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) {
      throw LookupError("index_select: row " + std::to_string(idx[i]) + " outside table of " + std::to_string(n) +
                        " rows");
    }
    std::copy_n(&t[idx[i] * c], c, &out[i * c]);
  }
  return table.tape().record(std::move(out), {table.id()},
                             [idx = std::move(idx), c](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < c; ++j) (*gi[0])[idx[i] * c + j] += g[i * c + j];
                             });
}

}  // namespace vaebench
