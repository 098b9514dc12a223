#include <doctest.h>

#include <cmath>

#include "vaebench/errors.hpp"
#include "vaebench/inference.hpp"
#include "vaebench/optim.hpp"
#include "vaebench/selftest.hpp"

using namespace vaebench;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

/// Posterior mean and variance of z ~ N(0,1), x | z ~ N(a z, s^2) by Simpson's rule.
std::pair<double, double> quadrature_posterior(double x, double a, double s) {
  const double lo = -15.0, hi = 15.0;
  const int n = 30000;  // even
  const double h = (hi - lo) / n;
  double z0 = 0.0, z1 = 0.0, z2 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + h * i;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double r = x - a * z;
    const double dens = std::exp(-0.5 * z * z - 0.5 * r * r / (s * s));
    z0 += w * dens;
    z1 += w * dens * z;
    z2 += w * dens * z * z;
  }
  const double mean = z1 / z0;
  return {mean, z2 / z0 - mean * mean};
}

}  // namespace

TEST_CASE("encoder backend") {
  Rng rng(1);
  EncoderBackend enc(12, 3, {8, 8}, rng);
  enc.network().zero();
  std::vector<double> x(12);
  for (double& v : x) v = rng.normal();
  const auto d = enc.encode(x);
  CHECK(d.mu == std::vector<double>(3, 0.0));
  CHECK(d.log_sigma == std::vector<double>(3, 0.0));

  EncoderBackend live(12, 3, {8, 8}, rng);
  CHECK(live.encode(x).mu == live.encode(x).mu);
  CHECK_THROWS_AS(live.encode(std::vector<double>(5, 0.0)), ContractError);
  Tape tape;
  CHECK_THROWS_AS(live.encode(tape, tape.constant(Tensor(Shape{2, 5}))), ContractError);

  // Extreme outputs are clamped to the log sigma range.
  auto& bias = live.network().output_bias();
  for (std::size_t j = 3; j < 6; ++j) bias.value[j] = 100.0;
  for (double s : live.encode(x).log_sigma) CHECK(s == kLogSigmaMax);
}

TEST_CASE("lookup table rows") {
  VltBackend vlt(6, 2);
  vlt.init_zeros();
  vlt.set_row(3, {{1.0, 2.0}, {0.0, 0.0}});
  const auto row = vlt.lookup(3);
  CHECK(row.mu == std::vector<double>{1.0, 2.0});
  CHECK(row.log_sigma == std::vector<double>{0.0, 0.0});
  CHECK(vlt.lookup(0).log_sigma == std::vector<double>{-8.0, -8.0});
  CHECK_THROWS_AS(vlt.lookup(6), LookupError);
  Tape tape;
  const std::vector<std::size_t> bad{1, 9};
  CHECK_THROWS_AS(vlt.lookup(tape, bad), LookupError);
}

TEST_CASE("lookup table gradient locality") {
  Rng rng(2);
  VltBackend vlt(8, 3);
  vlt.init_normal(rng, -1.0);
  const Tensor before = vlt.table().value;
  vlt.table().zero_grad();

  Tape tape;
  const std::vector<std::size_t> batch{3};
  const LatentVars q = vlt.lookup(tape, batch);
  tape.backward(sum(add(square(q.mu), exp(q.log_sigma))));
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      if (r == 3) CHECK(vlt.table().grad.at(r, c) != 0.0);
      else CHECK(vlt.table().grad.at(r, c) == 0.0);
    }

  // A minibatch step touching S changes only rows in S.
  const std::vector<std::size_t> s{1, 5, 5};
  Adam adam({{{&vlt.table()}, 0.1}});
  adam.zero_grad();
  Tape t2;
  const LatentVars q2 = vlt.lookup(t2, s);
  t2.backward(mean(kl_standard_normal(q2)));
  adam.step();
  for (std::size_t r = 0; r < 8; ++r) {
    const bool in_s = r == 1 || r == 5;
    for (std::size_t c = 0; c < 6; ++c) {
      if (in_s) CHECK(vlt.table().value.at(r, c) != before.at(r, c));
      else CHECK(vlt.table().value.at(r, c) == before.at(r, c));
    }
  }
}

TEST_CASE("reparameterized sampling") {
  const LatentDistribution d{{0.5, -1.0}, {0.3, -0.2}};
  CHECK(sample_z(d, std::vector<double>{0.0, 0.0}) == d.mu);
  const LatentDistribution tight{{0.0}, {-20.0}};
  Rng rng(3);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sample_z(tight, rng)[0]) < 1e-8);

  const LatentDistribution unit{{0.0}, {0.0}};
  double m = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = sample_z(unit, rng)[0];
    m += z;
    sq += z * z;
  }
  m /= n;
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(sq / n - m * m - 1.0) < 0.05);

  for (const auto& c : reparameterization_checks()) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("analytic KL") {
  CHECK(kl_standard_normal(LatentDistribution{{0.0}, {0.0}}) == 0.0);
  CHECK(kl_standard_normal(LatentDistribution{{1.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(0.5));
  for (const auto& c : kl_checks(1'000'000)) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("ELBO terms") {
  const std::vector<double> x{0.3, -1.2, 2.0, 0.0};
  const auto t = elbo(x, x, LatentDistribution{{0.0}, {0.0}}, Likelihood::gaussian(1.0));
  CHECK(t.kl == 0.0);
  CHECK(t.recon == doctest::Approx(-0.5 * 4 * kLog2Pi));
  CHECK(t.elbo == t.recon);

  const std::vector<double> bits{0.0, 1.0, 1.0, 0.0};
  const std::vector<double> hard{1.0, 0.0, 1.0, 0.0};
  const double ll = log_likelihood(bits, hard, Likelihood::bernoulli());
  CHECK(std::isfinite(ll));
  CHECK(ll == doctest::Approx(2.0 * std::log(1e-7)).epsilon(1e-6));
  CHECK_THROWS_AS(log_likelihood(std::vector<double>{1.5}, std::vector<double>{0.5}, Likelihood::bernoulli()),
                  ContractError);
}

TEST_CASE("linear-Gaussian posterior") {
  const auto p = exact_linear_gaussian_posterior(2.0, 1.0, 1.0);
  CHECK(p.mean == doctest::Approx(1.0));
  CHECK(p.variance == doctest::Approx(0.5));
  const auto prior = exact_linear_gaussian_posterior(3.0, 0.0, 0.7);
  CHECK(prior.mean == 0.0);
  CHECK(prior.variance == 1.0);
  CHECK_THROWS_AS(exact_linear_gaussian_posterior(1.0, 1.0, 0.0), ContractError);

  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const double a = rng.uniform(-2.0, 2.0), s = rng.uniform(0.3, 2.0), x = 2.0 * rng.normal();
    const auto exact = exact_linear_gaussian_posterior(x, a, s);
    const auto [mean, var] = quadrature_posterior(x, a, s);
    CHECK(std::abs(exact.mean - mean) < 1e-6);
    CHECK(std::abs(exact.variance - var) < 1e-6);
  }
}

TEST_CASE("ELBO identity and lookup-table posterior recovery") {
  for (const auto& c : elbo_identity_checks()) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}
