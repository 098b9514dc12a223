#include "vaebench/optim.hpp"

#include <cmath>

#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

void require_gradient(const Parameter& p) {
  if (p.grad.shape() != p.value.shape()) {
    throw ContractError("missing gradient for parameter '" + p.name + "'");
  }
}

}  // namespace

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (p->frozen) continue;
    require_gradient(*p);
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
}

void Sgd::step() {
  for (auto& group : groups_) sgd_step(group.params, group.lr);
}

void Sgd::zero_grad() {
  for (auto& group : groups_)
    for (Parameter* p : group.params) p->zero_grad();
}

Adam::Adam(std::vector<ParamGroup> groups, AdamHyper hyper) : groups_(std::move(groups)), hyper_(hyper) {
  state_.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (Parameter* p : groups_[g].params) {
      State s;
      s.m.assign(p->value.size(), 0.0);
      s.v.assign(p->value.size(), 0.0);
      if (p->sparse_rows) s.row_steps.assign(p->value.rows(), 0);
      state_[g].push_back(std::move(s));
    }
  }
}

void Adam::step() {
  ++steps_;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (std::size_t k = 0; k < groups_[g].params.size(); ++k) {
      Parameter& p = *groups_[g].params[k];
      if (p.frozen) continue;
      require_gradient(p);
      if (p.sparse_rows) {
        update_rows(p, state_[g][k], groups_[g].lr);
      } else {
        update_dense(p, state_[g][k], groups_[g].lr);
      }
    }
  }
}

void Adam::update_dense(Parameter& p, State& s, double lr) {
  const double b1 = hyper_.beta1, b2 = hyper_.beta2, eps = hyper_.eps;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step = lr / c1;
  const double root_c2 = std::sqrt(c2);
  double* w = p.value.data().data();
  const double* g = p.grad.data().data();
  double* m = s.m.data();
  double* v = s.v.data();
  const std::size_t n = s.m.size();
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    w[i] -= step * m[i] / (std::sqrt(v[i]) / root_c2 + eps);
  }
}

void Adam::update_rows(Parameter& p, State& s, double lr) {
  const double b1 = hyper_.beta1, b2 = hyper_.beta2, eps = hyper_.eps;
  const std::size_t rows = p.value.rows(), cols = p.value.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = &p.grad[r * cols];
    bool touched = false;
    for (std::size_t j = 0; j < cols && !touched; ++j) touched = g[j] != 0.0;
    if (!touched) continue;
    const double t = static_cast<double>(++s.row_steps[r]);
    const double c1 = 1.0 - std::pow(b1, t);
    const double root_c2 = std::sqrt(1.0 - std::pow(b2, t));
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t i = r * cols + j;
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g[j];
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g[j] * g[j];
      p.value[i] -= (lr / c1) * s.m[i] / (std::sqrt(s.v[i]) / root_c2 + eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& group : groups_)
    for (Parameter* p : group.params) p->zero_grad();
}

}  // namespace vaebench
