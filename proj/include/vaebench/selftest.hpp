#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace vaebench {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Tape gradients of every differentiable operation and of the full training
/// losses against central differences (step 1e-6, relative error < 1e-5).
std::vector<CheckResult> gradient_checks();
/// Imaging operator adjoints against dense transposes at grid size `l`.
std::vector<CheckResult> adjoint_checks(std::size_t l = 16);
/// Analytic KL against Monte-Carlo estimates, and KL >= 0 over random draws.
std::vector<CheckResult> kl_checks(std::size_t samples = 1'000'000);
/// ELBO + KL(q || posterior) = log p(x) on the linear-Gaussian model, and a
/// lookup table fitted by gradient ascent recovering the exact posteriors.
std::vector<CheckResult> elbo_identity_checks();
/// Pathwise gradients of E[z] and E[z^2] through the reparameterization.
std::vector<CheckResult> reparameterization_checks();

/// Runs every group, printing "PASS name detail" or "FAIL name detail" per
/// check. Returns 0 when all pass.
int run_selftest(std::ostream& out);

/// Prints the results and returns true when all passed.
bool report_checks(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace vaebench
