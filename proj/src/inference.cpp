#include "vaebench/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

EncoderPreset parse_encoder_preset(const std::string& name) {
  if (name == "standard") return EncoderPreset::standard;
  if (name == "large") return EncoderPreset::large;
  if (name == "small") return EncoderPreset::small;
  throw ConfigError("unknown encoder preset '" + name + "' (expected standard, large, small)");
}

std::string to_string(EncoderPreset preset) {
  switch (preset) {
    case EncoderPreset::standard: return "standard";
    case EncoderPreset::large: return "large";
    case EncoderPreset::small: return "small";
  }
  return "standard";
}

std::vector<std::size_t> hidden_widths(EncoderPreset preset) {
  switch (preset) {
    case EncoderPreset::standard: return {256, 256, 256};
    case EncoderPreset::large: return {1024, 1024, 1024, 1024, 1024};
    case EncoderPreset::small: return {256, 256};
  }
  return {256, 256, 256};
}

EncoderBackend::EncoderBackend(std::size_t input_width, std::size_t z_dim, std::vector<std::size_t> hidden, Rng& rng)
    : z_dim_(z_dim) {
  if (z_dim == 0) throw ContractError("latent dimension must be positive");
  std::vector<std::size_t> widths{input_width};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * z_dim);
  mlp_ = Mlp("encoder", std::move(widths), rng);
}

LatentVars EncoderBackend::encode(Tape& tape, Var x) {
  Var out = mlp_.forward(tape, x);
  return {slice_cols(out, 0, z_dim_), clamp(slice_cols(out, z_dim_, 2 * z_dim_), kLogSigmaMin, kLogSigmaMax)};
}

Tensor EncoderBackend::encode_all(const Tensor& x) const {
  Tensor out = mlp_.evaluate(x);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = z_dim_; j < 2 * z_dim_; ++j) out.at(r, j) = std::clamp(out.at(r, j), kLogSigmaMin, kLogSigmaMax);
  return out;
}

LatentDistribution EncoderBackend::encode(std::span<const double> x) const {
  if (x.size() != input_width()) {
    throw ContractError("encoder input width " + std::to_string(x.size()) + " does not match " +
                        std::to_string(input_width()));
  }
  const Tensor out = encode_all(Tensor(Shape{1, x.size()}, std::vector<double>(x.begin(), x.end())));
  LatentDistribution d;
  d.mu.assign(out.data().begin(), out.data().begin() + static_cast<long>(z_dim_));
  d.log_sigma.assign(out.data().begin() + static_cast<long>(z_dim_), out.data().end());
  return d;
}

Tensor EncoderBackend::encode_means(const Tensor& x) const {
  const Tensor out = encode_all(x);
  Tensor mu(Shape{x.rows(), z_dim_});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < z_dim_; ++j) mu.at(r, j) = out.at(r, j);
  return mu;
}

VltInit parse_vlt_init(const std::string& name) {
  if (name == "normal") return VltInit::normal;
  if (name == "zeros") return VltInit::zeros;
  if (name == "checkpoint") return VltInit::checkpoint;
  throw ConfigError("unknown latent init '" + name + "' (expected normal, zeros, checkpoint)");
}

std::string to_string(VltInit init) {
  switch (init) {
    case VltInit::normal: return "normal";
    case VltInit::zeros: return "zeros";
    case VltInit::checkpoint: return "checkpoint";
  }
  return "normal";
}

VltBackend::VltBackend(std::size_t rows, std::size_t z_dim)
    : table_("vlt.table", Tensor(Shape{rows, 2 * z_dim})), z_dim_(z_dim) {
  if (z_dim == 0) throw ContractError("latent dimension must be positive");
  table_.sparse_rows = true;
}

void VltBackend::init_normal(Rng& rng, double log_sigma) {
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t j = 0; j < z_dim_; ++j) table_.value.at(r, j) = rng.normal();
    for (std::size_t j = z_dim_; j < 2 * z_dim_; ++j) table_.value.at(r, j) = log_sigma;
  }
  clamp_log_sigma();
}

void VltBackend::init_zeros(double log_sigma) {
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t j = 0; j < z_dim_; ++j) table_.value.at(r, j) = 0.0;
    for (std::size_t j = z_dim_; j < 2 * z_dim_; ++j) table_.value.at(r, j) = log_sigma;
  }
  clamp_log_sigma();
}

void VltBackend::init_from(const Tensor& table) {
  require_same_shape(table_.value, table, "VltBackend::init_from");
  table_.value = table;
  clamp_log_sigma();
}

LatentVars VltBackend::lookup(Tape& tape, std::span<const std::size_t> indices) {
  Var rows = index_select(tape.param(table_), indices);
  return {slice_cols(rows, 0, z_dim_), slice_cols(rows, z_dim_, 2 * z_dim_)};
}

LatentDistribution VltBackend::lookup(std::size_t index) const {
  if (index >= rows()) {
    throw LookupError("latent row " + std::to_string(index) + " outside table of " + std::to_string(rows()));
  }
  const auto row = table_.value.row(index);
  return {std::vector<double>(row.begin(), row.begin() + static_cast<long>(z_dim_)),
          std::vector<double>(row.begin() + static_cast<long>(z_dim_), row.end())};
}

void VltBackend::set_row(std::size_t index, const LatentDistribution& d) {
  if (index >= rows()) {
    throw LookupError("latent row " + std::to_string(index) + " outside table of " + std::to_string(rows()));
  }
  if (d.mu.size() != z_dim_ || d.log_sigma.size() != z_dim_) throw DimensionError("latent row width mismatch");
  auto row = table_.value.row(index);
  std::copy(d.mu.begin(), d.mu.end(), row.begin());
  std::copy(d.log_sigma.begin(), d.log_sigma.end(), row.begin() + static_cast<long>(z_dim_));
}

void VltBackend::clamp_log_sigma() {
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t j = z_dim_; j < 2 * z_dim_; ++j)
      table_.value.at(r, j) = std::clamp(table_.value.at(r, j), kLogSigmaMin, kLogSigmaMax);
}

Var sample_z(const LatentVars& q, const Tensor& eps) {
  Tape& tape = q.mu.tape();
  return add(q.mu, mul(exp(q.log_sigma), tape.constant(eps)));
}

std::vector<double> sample_z(const LatentDistribution& d, std::span<const double> eps) {
  if (eps.size() != d.dim()) throw DimensionError("sample_z: eps width mismatch");
  std::vector<double> z(d.dim());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = d.mu[j] + std::exp(d.log_sigma[j]) * eps[j];
  return z;
}

std::vector<double> sample_z(const LatentDistribution& d, Rng& rng) {
  std::vector<double> eps(d.dim());
  for (double& e : eps) e = rng.normal();
  return sample_z(d, eps);
}

Tensor standard_normal(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

double kl_standard_normal(const LatentDistribution& d) {
  double kl = 0.0;
  for (std::size_t j = 0; j < d.dim(); ++j) {
    const double two_ls = 2.0 * d.log_sigma[j];
    kl += d.mu[j] * d.mu[j] + std::exp(two_ls) - 1.0 - two_ls;
  }
  return 0.5 * kl;
}

Var kl_standard_normal(const LatentVars& q) {
  const double z = static_cast<double>(q.mu.value().cols());
  Var two_ls = scale(q.log_sigma, 2.0);
  Var terms = sub(add(square(q.mu), exp(two_ls)), two_ls);
  return add_scalar(scale(row_sum(terms), 0.5), -0.5 * z);
}

double log_likelihood(std::span<const double> x, std::span<const double> x_hat, const Likelihood& lik) {
  if (x.size() != x_hat.size()) throw DimensionError("log_likelihood: image sizes differ");
  double total = 0.0;
  if (lik.kind == Likelihood::Kind::gaussian) {
    const double var = lik.sigma_n * lik.sigma_n;
    for (std::size_t i = 0; i < x.size(); ++i) total += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
    return -total / (2.0 * var) - 0.5 * static_cast<double>(x.size()) * (kLog2Pi + std::log(var));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0) || !(x_hat[i] >= 0.0 && x_hat[i] <= 1.0)) {
      throw ContractError("bernoulli likelihood needs values in [0,1]");
    }
    const double p = std::clamp(x_hat[i], kBernoulliClamp, 1.0 - kBernoulliClamp);
    total += x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
  }
  return total;
}

Var log_likelihood(Var x_hat, const Tensor& x, const Likelihood& lik) {
  Tape& tape = x_hat.tape();
  if (x_hat.shape() != x.shape()) {
    throw DimensionError("log_likelihood: shape mismatch " + shape_string(x_hat.shape()) + " vs " +
                         shape_string(x.shape()));
  }
  const double n = static_cast<double>(x.cols());
  if (lik.kind == Likelihood::Kind::gaussian) {
    const double var = lik.sigma_n * lik.sigma_n;
    Var sq = row_sum(square(sub(x_hat, tape.constant(x))));
    return add_scalar(scale(sq, -1.0 / (2.0 * var)), -0.5 * n * (kLog2Pi + std::log(var)));
  }
  Tensor one_minus_x(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) throw ContractError("bernoulli likelihood needs data in [0,1]");
    one_minus_x[i] = 1.0 - x[i];
  }
  Var p = clamp(x_hat, kBernoulliClamp, 1.0 - kBernoulliClamp);
  Var terms = add(mul(tape.constant(x), log(p)), mul(tape.constant(std::move(one_minus_x)), log(add_scalar(neg(p), 1.0))));
  return row_sum(terms);
}

ELBOTerms elbo(std::span<const double> x, std::span<const double> x_hat, const LatentDistribution& d,
               const Likelihood& lik, double beta) {
  ELBOTerms t;
  t.beta = beta;
  t.recon = log_likelihood(x, x_hat, lik);
  t.kl = kl_standard_normal(d);
  t.elbo = t.recon - beta * t.kl;
  return t;
}

LinearGaussianModel::Posterior exact_linear_gaussian_posterior(double x, double a, double s) {
  if (!(s > 0.0)) throw ContractError("noise scale must be positive");
  const double denom = a * a + s * s;
  return {a * x / denom, s * s / denom};
}

LinearGaussianModel::Posterior LinearGaussianModel::posterior(double x) const {
  return exact_linear_gaussian_posterior(x, a, s);
}

double LinearGaussianModel::log_evidence(double x) const {
  const double var = a * a + s * s;
  return -0.5 * (kLog2Pi + std::log(var) + x * x / var);
}

double LinearGaussianModel::elbo(double x, double q_mean, double q_std) const {
  const double r = x - a * q_mean;
  const double expected = -0.5 * (kLog2Pi + std::log(s * s)) - (r * r + a * a * q_std * q_std) / (2.0 * s * s);
  return expected - kl_gaussian(q_mean, q_std, 0.0, 1.0);
}

double LinearGaussianModel::kl_to_posterior(double x, double q_mean, double q_std) const {
  const auto p = posterior(x);
  return kl_gaussian(q_mean, q_std, p.mean, std::sqrt(p.variance));
}

Var LinearGaussianModel::expected_log_likelihood(const LatentVars& q, const Tensor& x) const {
  Tape& tape = q.mu.tape();
  Var resid = sub(tape.constant(x), scale(q.mu, a));
  Var spread = scale(exp(scale(q.log_sigma, 2.0)), a * a);
  Var quad = row_sum(add(square(resid), spread));
  return add_scalar(scale(quad, -1.0 / (2.0 * s * s)), -0.5 * (kLog2Pi + std::log(s * s)));
}

double kl_gaussian(double m1, double s1, double m2, double s2) {
  return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
}

}  // namespace vaebench
