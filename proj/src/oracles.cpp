#include "vaebench/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "vaebench/random.hpp"

namespace vaebench {

namespace {

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t max_coords, Rng& rng) {
  if (max_coords == 0 || max_coords >= n) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  auto perm = rng.permutation(n);
  perm.resize(max_coords);
  std::sort(perm.begin(), perm.end());
  return perm;
}

void fold(GradCheckResult& r, std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  r.max_abs_error = std::max(r.max_abs_error, diff);
  r.max_rel_error = std::max(r.max_rel_error, diff / scale);
  r.coordinates += analytic.size();
}

}  // namespace

GradCheckResult check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double h, std::size_t max_coords,
                                std::uint64_t seed) {
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x));
  const GradientMap grads = tape.backward(f(tape, vars));

  GradCheckResult result;
  Rng rng(seed, "gradcheck");
  std::vector<Tensor> work = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto it = grads.find(vars[k].id());
    const Tensor zero(inputs[k].shape());
    const Tensor& g = it == grads.end() ? zero : it->second;
    std::vector<double> analytic, numeric;
    for (std::size_t i : pick_coordinates(inputs[k].size(), max_coords, rng)) {
      const double x0 = inputs[k][i];
      work[k][i] = x0 + h;
      const double up = evaluate(work);
      work[k][i] = x0 - h;
      const double down = evaluate(work);
      work[k][i] = x0;
      analytic.push_back(g[i]);
      numeric.push_back((up - down) / (2.0 * h));
    }
    fold(result, analytic, numeric);
  }
  return result;
}

GradCheckResult check_parameter_gradients(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                                          double h, std::size_t coords_per_param, std::uint64_t seed) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).item();
  };

  GradCheckResult result;
  Rng rng(seed, "gradcheck");
  for (Parameter* p : params) {
    if (p->frozen) continue;
    std::vector<double> analytic, numeric;
    for (std::size_t i : pick_coordinates(p->value.size(), coords_per_param, rng)) {
      const double x0 = p->value[i];
      p->value[i] = x0 + h;
      const double up = evaluate();
      p->value[i] = x0 - h;
      const double down = evaluate();
      p->value[i] = x0;
      analytic.push_back(p->grad[i]);
      numeric.push_back((up - down) / (2.0 * h));
    }
    fold(result, analytic, numeric);
  }
  return result;
}

double dense_adjoint_error(const LinearMap& forward, const LinearMap& adjoint, std::size_t n_in, std::size_t n_out) {
  // Column-major dense A: column i = forward(e_i).
  std::vector<double> a(n_in * n_out);
  std::vector<double> basis(n_in, 0.0);
  for (std::size_t i = 0; i < n_in; ++i) {
    basis[i] = 1.0;
    forward(basis, std::span<double>(a.data() + i * n_out, n_out));
    basis[i] = 0.0;
  }
  double worst = 0.0;
  std::vector<double> e(n_out, 0.0), back(n_in);
  for (std::size_t j = 0; j < n_out; ++j) {
    e[j] = 1.0;
    adjoint(e, back);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) worst = std::max(worst, std::abs(back[i] - a[i * n_out + j]));
  }
  return worst;
}

}  // namespace vaebench
