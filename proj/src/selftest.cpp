#include "vaebench/selftest.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "vaebench/dataset.hpp"
#include "vaebench/decoder.hpp"
#include "vaebench/experiments.hpp"
#include "vaebench/forward_model.hpp"
#include "vaebench/inference.hpp"
#include "vaebench/optim.hpp"
#include "vaebench/oracles.hpp"

namespace vaebench {

namespace {

constexpr double kStep = 1e-6;
constexpr double kGradTolerance = 1e-5;
constexpr double kAdjointTolerance = 1e-10;

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

/// Values kept at least `gap` away from each kink so central differences do not straddle one.
Tensor away_from(Tensor t, std::initializer_list<double> kinks, double gap = 1e-3) {
  for (double& v : t.data())
    for (double k : kinks)
      if (std::abs(v - k) < gap) v = k + (v < k ? -2.0 * gap : 2.0 * gap);
  return t;
}

/// Reduces a tensor-valued op to a scalar through a fixed random weighting.
Var weighted(Var y, std::uint64_t seed) {
  Rng rng(seed, "weights");
  Tensor w(y.shape());
  for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
  return sum(mul(y, y.tape().constant(std::move(w))));
}

CheckResult grad_result(const std::string& name, const GradCheckResult& r) {
  return {"gradient " + name, r.max_rel_error < kGradTolerance,
          "rel_err=" + sci(r.max_rel_error) + " coords=" + std::to_string(r.coordinates)};
}

Dataset tiny_dataset(std::size_t n, std::uint64_t seed) {
  GenerationSpec spec;
  spec.count = n;
  spec.image_size = 16;
  spec.grid = 16;
  spec.snr = 1.0;
  spec.seed = seed;
  return generate_dataset(spec);
}

/// The training loss of a small model, differenced over sampled parameter coordinates.
CheckResult model_loss_check(const std::string& name, ExperimentConfig cfg, const Dataset& data) {
  Model model(cfg, data);
  const std::vector<std::size_t> idx{0, 2, 3};
  Tensor inputs(Shape{idx.size(), data.image_size * data.image_size});
  Tensor targets(inputs.shape());
  std::vector<Pose> poses;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& px = data.images[idx[r]].pixels;
    std::copy(px.begin(), px.end(), inputs.row(r).begin());
    std::copy(px.begin(), px.end(), targets.row(r).begin());
    poses.push_back(data.images[idx[r]].pose);
  }
  Rng rng(cfg.seed, "selftest-eps");
  const Tensor eps = standard_normal(Shape{idx.size(), cfg.z_dim}, rng);
  const Likelihood lik = data.mode == DatasetMode::tomographic ? Likelihood::gaussian(cfg.sigma_n) : Likelihood::bernoulli();
  auto loss = [&](Tape& tape) {
    const Tensor in = cfg.backend == BackendKind::encoder ? inputs : Tensor();
    return batch_loss(model, tape, in, idx, targets, poses, eps, lik, cfg.beta).loss;
  };
  const auto params = model.parameters();
  return grad_result(name, check_parameter_gradients(loss, params, kStep, 12, cfg.seed));
}

}  // namespace

std::vector<CheckResult> gradient_checks() {
  std::vector<CheckResult> out;
  Rng rng(11, "selftest-grad");
  auto unary = [&](const std::string& name, std::function<Var(Var)> op, Tensor x) {
    ScalarFn f = [op](Tape&, std::span<const Var> v) { return weighted(op(v[0]), 1); };
    out.push_back(grad_result(name, check_gradients(f, {std::move(x)}, kStep)));
  };
  auto binary = [&](const std::string& name, std::function<Var(Var, Var)> op, Tensor x, Tensor y) {
    ScalarFn f = [op](Tape&, std::span<const Var> v) { return weighted(op(v[0], v[1]), 2); };
    out.push_back(grad_result(name, check_gradients(f, {std::move(x), std::move(y)}, kStep)));
  };

  const Shape m{4, 5};
  binary("add", [](Var a, Var b) { return add(a, b); }, random_tensor(m, rng), random_tensor(m, rng));
  binary("sub", [](Var a, Var b) { return sub(a, b); }, random_tensor(m, rng), random_tensor(m, rng));
  binary("mul", [](Var a, Var b) { return mul(a, b); }, random_tensor(m, rng), random_tensor(m, rng));
  binary("mul_scalar", [](Var a, Var b) { return mul(a, b); }, random_tensor(m, rng), random_tensor({1}, rng));
  binary("matmul", [](Var a, Var b) { return matmul(a, b); }, random_tensor({3, 4}, rng), random_tensor({4, 6}, rng));
  binary("concat_cols", [](Var a, Var b) { return concat(a, b, 1); }, random_tensor({3, 2}, rng),
         random_tensor({3, 4}, rng));
  binary("concat_rows", [](Var a, Var b) { return concat(a, b, 0); }, random_tensor({2, 3}, rng),
         random_tensor({4, 3}, rng));
  {
    ScalarFn f = [](Tape&, std::span<const Var> v) { return weighted(affine(v[0], v[1], v[2]), 3); };
    out.push_back(grad_result(
        "affine", check_gradients(f, {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
                                  kStep)));
  }
  unary("neg", [](Var a) { return neg(a); }, random_tensor(m, rng));
  unary("scale", [](Var a) { return scale(a, -1.7); }, random_tensor(m, rng));
  unary("add_scalar", [](Var a) { return add_scalar(a, 0.3); }, random_tensor(m, rng));
  unary("sum", [](Var a) { return sum(a); }, random_tensor(m, rng));
  unary("mean", [](Var a) { return mean(a); }, random_tensor(m, rng));
  unary("row_sum", [](Var a) { return row_sum(a); }, random_tensor(m, rng));
  unary("exp", [](Var a) { return exp(a); }, random_tensor(m, rng));
  {
    Tensor x = random_tensor(m, rng);
    for (double& v : x.data()) v = 0.2 + std::abs(v);
    unary("log", [](Var a) { return log(a); }, x);
  }
  unary("relu", [](Var a) { return relu(a); }, away_from(random_tensor(m, rng), {0.0}));
  unary("sigmoid", [](Var a) { return sigmoid(a); }, random_tensor(m, rng, 3.0));
  unary("square", [](Var a) { return square(a); }, random_tensor(m, rng));
  unary("clamp", [](Var a) { return clamp(a, -0.5, 0.7); }, away_from(random_tensor(m, rng), {-0.5, 0.7}));
  unary("reshape", [](Var a) { return reshape(a, {2, 10}); }, random_tensor(m, rng));
  unary("slice_cols", [](Var a) { return slice_cols(a, 1, 4); }, random_tensor(m, rng));
  {
    const std::vector<std::size_t> rows{3, 0, 3, 1};
    unary("index_select", [rows](Var a) { return index_select(a, rows); }, random_tensor({5, 3}, rng));
  }

  // Inference pieces.
  {
    const Tensor eps = random_tensor({3, 4}, rng);
    binary("sample_z", [eps](Var mu, Var ls) { return sample_z(LatentVars{mu, ls}, eps); }, random_tensor({3, 4}, rng),
           random_tensor({3, 4}, rng, 0.5));
    binary("kl_standard_normal", [](Var mu, Var ls) { return kl_standard_normal(LatentVars{mu, ls}); },
           random_tensor({3, 4}, rng), random_tensor({3, 4}, rng, 0.5));
  }
  {
    const Tensor x = random_tensor({3, 6}, rng);
    unary("gaussian_log_likelihood", [x](Var xh) { return log_likelihood(xh, x, Likelihood::gaussian(0.8)); },
          random_tensor({3, 6}, rng));
    Tensor bits(Shape{3, 6});
    for (double& v : bits.data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    Tensor p(Shape{3, 6});
    for (double& v : p.data()) v = rng.uniform(0.1, 0.9);
    unary("bernoulli_log_likelihood", [bits](Var xh) { return log_likelihood(xh, bits, Likelihood::bernoulli()); }, p);
  }
  {
    const LinearGaussianModel lg{1.3, 0.7};
    const Tensor x = random_tensor({4, 1}, rng);
    binary("linear_gaussian_expected_loglik",
           [lg, x](Var mu, Var ls) { return lg.expected_log_likelihood(LatentVars{mu, ls}, x); },
           random_tensor({4, 1}, rng), random_tensor({4, 1}, rng, 0.5));
  }

  // Networks and the imaging chain.
  {
    Rng init(5, "selftest-mlp");
    auto mlp = std::make_shared<Mlp>("mlp", std::vector<std::size_t>{5, 7, 3}, init);
    unary("mlp_input", [mlp](Var x) { return mlp->forward(x.tape(), x); }, random_tensor({4, 5}, rng));
    auto params = mlp->parameters();
    const Tensor x = random_tensor({4, 5}, rng);
    out.push_back(grad_result("mlp_parameters",
                              check_parameter_gradients([&](Tape& t) { return weighted(mlp->forward(t, t.constant(x)), 4); },
                                                        params, kStep, 0)));
  }
  {
    Rng init(6, "selftest-render");
    auto dec = std::make_shared<TomographicDecoder>(3, 16, std::vector<std::size_t>{16}, init);
    std::vector<Pose> poses(2);
    poses[0].rotation = Quaternion::from_axis_angle(0.3, -0.5, 0.8, 0.9);
    poses[0].shift = {0.6, -1.3};
    poses[0].kernel_id = 2;
    poses[1].rotation = Quaternion::from_axis_angle(-1.0, 0.2, 0.1, 2.4);
    poses[1].shift = {-1.7, 0.4};
    poses[1].kernel_id = 1;
    unary("render_latent", [dec, poses](Var z) { return render(dec->decode(z.tape(), z), poses); },
          random_tensor({2, 3}, rng));
    unary("render_volume", [poses](Var v) { return render(v, poses); }, random_tensor({2, 16 * 16 * 16}, rng));
    Rng pinit(7, "selftest-pixels");
    auto pix = std::make_shared<PixelDecoder>(3, 6, std::vector<std::size_t>{8, 8}, pinit);
    unary("decode_pixels", [pix](Var z) { return pix->decode(z.tape(), z); }, random_tensor({2, 3}, rng));
  }

  // Full training objectives.
  const Dataset data = tiny_dataset(4, 21);
  ExperimentConfig cfg;
  cfg.z_dim = 3;
  cfg.seed = 3;
  cfg.encoder_preset = EncoderPreset::small;
  cfg.decoder_preset = EncoderPreset::small;
  out.push_back(model_loss_check("model_loss_encoder", cfg, data));
  cfg.backend = BackendKind::vlt;
  cfg.init_log_sigma = -1.0;
  out.push_back(model_loss_check("model_loss_vlt", cfg, data));
  {
    Dataset pixels;
    pixels.mode = DatasetMode::pixel_image;
    pixels.image_size = 6;
    Rng prng(8, "selftest-pixel-data");
    for (std::size_t i = 0; i < 4; ++i) {
      ParticleImage img;
      img.index = i;
      img.truth = static_cast<double>(i % 2);
      for (int k = 0; k < 36; ++k) img.pixels.push_back(prng.uniform());
      pixels.images.push_back(img);
    }
    ExperimentConfig pc;
    pc.z_dim = 2;
    pc.seed = 4;
    pc.encoder_preset = EncoderPreset::small;
    pc.decoder_preset = EncoderPreset::small;
    out.push_back(model_loss_check("model_loss_pixels", pc, pixels));
  }
  return out;
}

std::vector<CheckResult> adjoint_checks(std::size_t l) {
  std::vector<CheckResult> out;
  const std::size_t n3 = l * l * l, n2 = l * l;
  auto add = [&](const std::string& name, double err) {
    out.push_back({"adjoint " + name, err < kAdjointTolerance, "max_abs_err=" + sci(err)});
  };
  const Mat3 r = rotation_matrix(Quaternion::from_axis_angle(0.4, -0.3, 0.85, 1.1));
  add("rotate", dense_adjoint_error([&](auto in, auto o) { rotate_forward(in, l, r, o); },
                                    [&](auto in, auto o) { rotate_adjoint(in, l, r, o); }, n3, n3));
  add("project", dense_adjoint_error([&](auto in, auto o) { project_forward(in, l, o); },
                                     [&](auto in, auto o) { project_adjoint(in, l, o); }, n3, n2));
  const std::array<double, 2> t{1.3, -0.65};
  add("translate", dense_adjoint_error([&](auto in, auto o) { translate_forward(in, l, t, o); },
                                       [&](auto in, auto o) { translate_adjoint(in, l, t, o); }, n2, n2));
  const KernelBank& bank = KernelBank::standard();
  for (std::size_t id = 0; id < bank.size(); ++id) {
    const auto& taps = bank.kernel(id);
    add("filter_" + std::to_string(id), dense_adjoint_error([&](auto in, auto o) { convolve_forward(in, l, taps, o); },
                                                            [&](auto in, auto o) { convolve_adjoint(in, l, taps, o); },
                                                            n2, n2));
  }
  Pose pose;
  pose.rotation = Quaternion::from_axis_angle(-0.2, 0.9, 0.3, 2.2);
  pose.shift = {-0.8, 1.9};
  pose.kernel_id = 2;
  const ImagingOperator op(l, pose);
  add("imaging_chain", dense_adjoint_error([&](auto in, auto o) { op.forward(in, o); },
                                           [&](auto in, auto o) { op.adjoint(in, o); }, n3, n2));
  return out;
}

std::vector<CheckResult> kl_checks(std::size_t samples) {
  std::vector<CheckResult> out;
  Rng rng(13, "selftest-kl");
  double worst = 0.0;
  for (int g = 0; g < 20; ++g) {
    LatentDistribution d;
    for (int j = 0; j < 4; ++j) {
      d.mu.push_back(rng.normal());
      d.log_sigma.push_back(rng.uniform(-1.0, 0.5));
    }
    const double analytic = kl_standard_normal(d);
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      double log_ratio = 0.0;
      for (std::size_t j = 0; j < d.dim(); ++j) {
        const double e = rng.normal();
        const double z = d.mu[j] + std::exp(d.log_sigma[j]) * e;
        // log q(z) - log p(z); the 2*pi terms cancel.
        log_ratio += -d.log_sigma[j] - 0.5 * e * e + 0.5 * z * z;
      }
      total += log_ratio;
    }
    const double mc = total / static_cast<double>(samples);
    worst = std::max(worst, std::abs(mc - analytic) / analytic);
  }
  out.push_back({"kl monte_carlo", worst < 0.01, "max_rel_err=" + sci(worst) + " samples=" + std::to_string(samples)});

  double smallest = INFINITY;
  for (int i = 0; i < 10000; ++i) {
    LatentDistribution d;
    const int dim = 1 + static_cast<int>(rng.below(8));
    for (int j = 0; j < dim; ++j) {
      d.mu.push_back(rng.normal() * rng.uniform(0.0, 3.0));
      d.log_sigma.push_back(rng.uniform(-6.0, 3.0));
    }
    smallest = std::min(smallest, kl_standard_normal(d));
  }
  out.push_back({"kl nonnegative", smallest >= 0.0, "min_kl=" + sci(smallest)});
  return out;
}

std::vector<CheckResult> elbo_identity_checks() {
  std::vector<CheckResult> out;
  Rng rng(17, "selftest-elbo");
  double worst = 0.0;
  bool bound = true;
  for (int i = 0; i < 100; ++i) {
    const LinearGaussianModel model{rng.uniform(-2.0, 2.0), rng.uniform(0.3, 2.0)};
    const double x = 2.0 * rng.normal();
    const double m = rng.normal(), sd = rng.uniform(0.1, 2.0);
    const double lhs = model.elbo(x, m, sd) + model.kl_to_posterior(x, m, sd);
    worst = std::max(worst, std::abs(lhs - model.log_evidence(x)));
    bound = bound && model.elbo(x, m, sd) <= model.log_evidence(x) + 1e-12;
  }
  out.push_back({"elbo identity", worst < 1e-8 && bound, "max_abs_err=" + sci(worst)});

  // Lookup-table rows fitted by gradient ascent on the exact ELBO.
  const auto start = std::chrono::steady_clock::now();
  const LinearGaussianModel model{1.5, 0.8};
  const std::size_t n = 64;
  Tensor x(Shape{n, 1});
  for (double& v : x.data()) v = 2.0 * rng.normal();
  VltBackend vlt(n, 1);
  vlt.init_normal(rng, 0.0);
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  Adam adam({{{&vlt.table()}, 0.02}});
  for (int step = 0; step < 4000; ++step) {
    Tape tape;
    const LatentVars q = vlt.lookup(tape, all);
    const Var elbo_rows = sub(model.expected_log_likelihood(q, x), kl_standard_normal(q));
    adam.zero_grad();
    tape.backward(neg(sum(elbo_rows)));
    adam.step();
  }
  double mean_err = 0.0, std_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto post = model.posterior(x[i]);
    const auto row = vlt.lookup(i);
    mean_err = std::max(mean_err, std::abs(row.mu[0] - post.mean));
    std_err = std::max(std_err, std::abs(std::exp(row.log_sigma[0]) - std::sqrt(post.variance)));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.push_back({"vlt posterior fit", mean_err < 1e-3 && std_err < 1e-2 && seconds < 30.0,
                 "mean_err=" + sci(mean_err) + " std_err=" + sci(std_err) + " seconds=" + sci(seconds)});
  return out;
}

std::vector<CheckResult> reparameterization_checks() {
  std::vector<CheckResult> out;
  Rng rng(19, "selftest-reparam");
  const std::size_t samples = 200000;
  const double mu0 = 0.4, ls0 = -0.3;
  const Tensor eps = random_tensor({samples, 1}, rng);
  auto mc = [&](double mu, double ls, bool squared, double* d_mu, double* d_ls) {
    Tape tape;
    Var m = tape.leaf(Tensor(Shape{samples, 1}, mu));
    Var l = tape.leaf(Tensor(Shape{samples, 1}, ls));
    Var z = sample_z(LatentVars{m, l}, eps);
    Var y = mean(squared ? square(z) : z);
    if (d_mu) {
      const auto g = tape.backward(y);
      *d_mu = 0.0;
      *d_ls = 0.0;
      for (double v : g.at(m.id()).data()) *d_mu += v;
      for (double v : g.at(l.id()).data()) *d_ls += v;
    }
    return y.item();
  };
  double dmu = 0.0, dls = 0.0;
  mc(mu0, ls0, false, &dmu, &dls);
  out.push_back({"reparam dEz_dmu", std::abs(dmu - 1.0) < 1e-9, "value=" + sci(dmu)});
  mc(mu0, ls0, true, &dmu, &dls);
  const double h = 1e-5;
  const double fd = (mc(mu0, ls0 + h, true, nullptr, nullptr) - mc(mu0, ls0 - h, true, nullptr, nullptr)) / (2.0 * h);
  const double rel = std::abs(dls - fd) / std::abs(fd);
  out.push_back({"reparam dEz2_dlogsigma", rel < 0.02, "rel_err=" + sci(rel)});
  return out;
}

bool report_checks(std::ostream& out, const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ' ' << r.detail << '\n';
    all = all && r.passed;
  }
  out.flush();
  return all;
}

int run_selftest(std::ostream& out) {
  bool ok = true;
  ok = report_checks(out, gradient_checks()) && ok;
  ok = report_checks(out, adjoint_checks(16)) && ok;
  ok = report_checks(out, kl_checks()) && ok;
  ok = report_checks(out, elbo_identity_checks()) && ok;
  ok = report_checks(out, reparameterization_checks()) && ok;
  out << (ok ? "selftest: all checks passed" : "selftest: FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace vaebench
