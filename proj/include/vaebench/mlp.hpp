#pragma once

#include <string>
#include <vector>

#include "vaebench/autodiff.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

/// Fully connected ReLU network. `widths` lists input, hidden..., output; the
/// output layer is linear.
class Mlp {
 public:
  Mlp() = default;
  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(std::string name, std::vector<std::size_t> widths, Rng& rng);

  Var forward(Tape& tape, Var x);
  /// Forward pass on a batch [B, in] without recording a tape.
  Tensor evaluate(const Tensor& x) const;

  std::vector<Parameter*> parameters();
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }

  /// Sets every weight and bias to zero.
  void zero();
  /// Bias of the output layer.
  Parameter& output_bias() { return params_.back(); }

 private:
  std::vector<std::size_t> widths_;
  std::vector<Parameter> params_;  // weight, bias per layer
};

}  // namespace vaebench
