#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaebench/autodiff.hpp"

namespace vaebench {

struct ParamGroup {
  std::vector<Parameter*> params;
  double lr = 1e-4;
};

/// Plain gradient descent: p <- p - lr * grad.
class Sgd {
 public:
  explicit Sgd(std::vector<ParamGroup> groups) : groups_(std::move(groups)) {}

  void step();
  void zero_grad();

 private:
  std::vector<ParamGroup> groups_;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters flagged `sparse_rows` are updated
/// lazily: only rows with a nonzero gradient move, each with its own step count.
class Adam {
 public:
  explicit Adam(std::vector<ParamGroup> groups, AdamHyper hyper = {});

  void step();
  void zero_grad();
  std::uint64_t steps() const noexcept { return steps_; }

 private:
  struct State {
    std::vector<double> m;
    std::vector<double> v;
    std::vector<std::uint64_t> row_steps;
  };

  void update_dense(Parameter& p, State& s, double lr);
  void update_rows(Parameter& p, State& s, double lr);

  std::vector<ParamGroup> groups_;
  std::vector<std::vector<State>> state_;
  AdamHyper hyper_;
  std::uint64_t steps_ = 0;
};

/// Single SGD update on a set of parameters, for one-off use.
void sgd_step(std::span<Parameter* const> params, double lr);

}  // namespace vaebench
