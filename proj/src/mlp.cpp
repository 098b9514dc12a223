#include "vaebench/mlp.hpp"

#include <Eigen/Core>
#include <cmath>

#include "vaebench/errors.hpp"

namespace vaebench {

Mlp::Mlp(std::string name, std::vector<std::size_t> widths, Rng& rng) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ContractError("an MLP needs input and output widths");
  params_.reserve(2 * (widths_.size() - 1));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w(Shape{in, out});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    Tensor b(Shape{out});
    for (double& v : b.data()) v = rng.uniform(-bound, bound);
    params_.emplace_back(name + ".layer" + std::to_string(l) + ".weight", std::move(w));
    params_.emplace_back(name + ".layer" + std::to_string(l) + ".bias", std::move(b));
  }
}

Var Mlp::forward(Tape& tape, Var x) {
  if (x.value().rank() != 2 || x.value().cols() != input_width()) {
    throw ContractError("MLP input width " + std::to_string(x.value().rank() == 2 ? x.value().cols() : 0) +
                        " does not match " + std::to_string(input_width()));
  }
  Var h = x;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = affine(h, tape.param(params_[2 * l]), tape.param(params_[2 * l + 1]));
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

Tensor Mlp::evaluate(const Tensor& x) const {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (x.rank() != 2 || x.cols() != input_width()) throw ContractError("MLP input width mismatch");
  RowMatrix h = Eigen::Map<const RowMatrix>(x.data().data(), x.rows(), x.cols());
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params_[2 * l].value;
    const Tensor& b = params_[2 * l + 1].value;
    RowMatrix next = h * Eigen::Map<const RowMatrix>(w.data().data(), w.rows(), w.cols());
    next.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), b.size());
    if (l + 1 < layers) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return Tensor(Shape{x.rows(), output_width()}, std::vector<double>(h.data(), h.data() + h.size()));
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void Mlp::zero() {
  for (auto& p : params_) p.value.fill(0.0);
}

}  // namespace vaebench
