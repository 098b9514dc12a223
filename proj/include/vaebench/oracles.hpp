#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vaebench/autodiff.hpp"

namespace vaebench {

/// Worst discrepancy between tape gradients and central differences. The
/// relative error of each input is ||analytic - numeric||_inf divided by
/// max(||analytic||_inf, ||numeric||_inf, 1e-8).
struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Checks d f / d inputs. With `max_coords` > 0 only that many randomly chosen
/// coordinates per input are differenced.
GradCheckResult check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-6,
                                std::size_t max_coords = 0, std::uint64_t seed = 0);

/// Same check for a loss built from Parameters (tape.param), differencing
/// up to `coords_per_param` coordinates of each.
GradCheckResult check_parameter_gradients(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                                          double h = 1e-6, std::size_t coords_per_param = 16, std::uint64_t seed = 0);

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

/// Materializes the forward operator as a dense matrix column by column and
/// returns max |adjoint(e_j) - row_j(A)| over all output basis vectors.
double dense_adjoint_error(const LinearMap& forward, const LinearMap& adjoint, std::size_t n_in, std::size_t n_out);

}  // namespace vaebench
