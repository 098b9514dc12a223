#pragma once

#include <span>
#include <string>
#include <vector>

#include "vaebench/autodiff.hpp"
#include "vaebench/mlp.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 5.0;

/// Diagonal Gaussian q(z) = N(mu, diag(exp(log_sigma)^2)).
struct LatentDistribution {
  std::vector<double> mu;
  std::vector<double> log_sigma;

  std::size_t dim() const noexcept { return mu.size(); }
};

/// Batch of latent distributions on a tape, each [B, z_dim].
struct LatentVars {
  Var mu;
  Var log_sigma;
};

enum class EncoderPreset { standard, large, small };

EncoderPreset parse_encoder_preset(const std::string& name);
std::string to_string(EncoderPreset preset);
/// Hidden layer widths: standard 3x256, large 5x1024, small 2x256.
std::vector<std::size_t> hidden_widths(EncoderPreset preset);

/// Amortized inference network x -> (mu, log sigma).
class EncoderBackend {
 public:
  EncoderBackend() = default;
  EncoderBackend(std::size_t input_width, std::size_t z_dim, std::vector<std::size_t> hidden, Rng& rng);

  /// Forward pass on a batch [B, input_width]. log sigma is clamped to [-20, 5].
  LatentVars encode(Tape& tape, Var x);
  LatentDistribution encode(std::span<const double> x) const;
  /// Means for a batch of inputs [B, input_width] -> [B, z_dim].
  Tensor encode_means(const Tensor& x) const;
  Tensor encode_all(const Tensor& x) const;

  std::size_t z_dim() const noexcept { return z_dim_; }
  std::size_t input_width() const { return mlp_.input_width(); }
  Mlp& network() noexcept { return mlp_; }
  const Mlp& network() const noexcept { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }

 private:
  Mlp mlp_;
  std::size_t z_dim_ = 0;
};

enum class VltInit { normal, zeros, checkpoint };

VltInit parse_vlt_init(const std::string& name);
std::string to_string(VltInit init);

/// Variational lookup table: one independent (mu, log sigma) row per image.
class VltBackend {
 public:
  VltBackend() = default;
  VltBackend(std::size_t rows, std::size_t z_dim);

  /// mu ~ N(0,1) with log sigma = `log_sigma`.
  void init_normal(Rng& rng, double log_sigma);
  /// mu = 0 with log sigma = `log_sigma` (default -8).
  void init_zeros(double log_sigma = -8.0);
  /// Rows taken from a [rows, 2*z_dim] tensor.
  void init_from(const Tensor& table);

  /// Rows as a live view on the tape; gradients reach the selected rows only.
  LatentVars lookup(Tape& tape, std::span<const std::size_t> indices);
  /// Throws LookupError for an out-of-range index.
  LatentDistribution lookup(std::size_t index) const;
  void set_row(std::size_t index, const LatentDistribution& d);

  /// Clamps every log sigma into [-20, 5]; called after each optimizer step.
  void clamp_log_sigma();

  bool frozen() const noexcept { return table_.frozen; }
  void set_frozen(bool f) noexcept { table_.frozen = f; }
  std::size_t rows() const { return table_.value.rows(); }
  std::size_t z_dim() const noexcept { return z_dim_; }
  Parameter& table() noexcept { return table_; }
  const Parameter& table() const noexcept { return table_; }

 private:
  Parameter table_;
  std::size_t z_dim_ = 0;
};

/// z = mu + exp(log sigma) * eps, with eps supplied by the caller.
Var sample_z(const LatentVars& q, const Tensor& eps);
std::vector<double> sample_z(const LatentDistribution& d, std::span<const double> eps);
std::vector<double> sample_z(const LatentDistribution& d, Rng& rng);
Tensor standard_normal(Shape shape, Rng& rng);

/// KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2).
double kl_standard_normal(const LatentDistribution& d);
/// Per-row KL for a batch: [B].
Var kl_standard_normal(const LatentVars& q);

struct Likelihood {
  enum class Kind { gaussian, bernoulli } kind = Kind::gaussian;
  double sigma_n = 1.0;

  static Likelihood gaussian(double sigma = 1.0) { return {Kind::gaussian, sigma}; }
  static Likelihood bernoulli() { return {Kind::bernoulli, 1.0}; }
};

inline constexpr double kBernoulliClamp = 1e-7;

/// log p(x | x_hat): Gaussian includes the normalizing constant; Bernoulli clamps
/// x_hat into [1e-7, 1 - 1e-7]. Throws ContractError for Bernoulli data outside [0,1].
double log_likelihood(std::span<const double> x, std::span<const double> x_hat, const Likelihood& lik);
/// Per-row log-likelihood for a batch: x_hat [B, N], x [B, N] -> [B].
Var log_likelihood(Var x_hat, const Tensor& x, const Likelihood& lik);

struct ELBOTerms {
  double recon = 0.0;  // E_q log p(x|z), single sample
  double kl = 0.0;
  double elbo = 0.0;   // recon - beta * kl
  double beta = 1.0;
};

ELBOTerms elbo(std::span<const double> x, std::span<const double> x_hat, const LatentDistribution& d,
               const Likelihood& lik, double beta = 1.0);

/// Scalar model x = a z + N(0, s^2) with prior z ~ N(0, 1). Closed forms used to
/// check the ELBO decomposition log p(x) = ELBO(q) + KL(q || p(z|x)).
struct LinearGaussianModel {
  double a = 1.0;
  double s = 1.0;

  struct Posterior {
    double mean;
    double variance;
  };

  Posterior posterior(double x) const;
  double log_evidence(double x) const;
  /// Exact ELBO for q = N(m, v): expected log-likelihood minus KL to the prior.
  double elbo(double x, double q_mean, double q_std) const;
  double kl_to_posterior(double x, double q_mean, double q_std) const;
  /// Expected log-likelihood term on the tape, per row of mu/log_sigma [B,1].
  Var expected_log_likelihood(const LatentVars& q, const Tensor& x) const;
};

LinearGaussianModel::Posterior exact_linear_gaussian_posterior(double x, double a, double s);

/// KL between two univariate Gaussians.
double kl_gaussian(double m1, double s1, double m2, double s2);

}  // namespace vaebench
