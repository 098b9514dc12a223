#include "vaebench/experiments.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vaebench/checkpoint.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/optim.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

std::string to_string(BackendKind kind) { return kind == BackendKind::encoder ? "encoder" : "vlt"; }

std::string to_string(TwinMode mode) {
  switch (mode) {
    case TwinMode::none: return "none";
    case TwinMode::permutation: return "permutation";
    case TwinMode::noise: return "noise";
  }
  return "none";
}

namespace {

BackendKind parse_backend(const std::string& s) {
  if (s == "encoder") return BackendKind::encoder;
  if (s == "vlt") return BackendKind::vlt;
  throw ConfigError("unknown backend '" + s + "' (expected encoder, vlt)");
}

TwinMode parse_twin_mode(const std::string& s) {
  if (s == "none") return TwinMode::none;
  if (s == "permutation") return TwinMode::permutation;
  if (s == "noise") return TwinMode::noise;
  throw ConfigError("unknown twin_mode '" + s + "' (expected none, permutation, noise)");
}

const std::set<std::string> kExperimentKeys{
    "dataset",     "backend",   "backend_init", "init_checkpoint", "init_log_sigma", "zero_init_log_sigma",
    "freeze_latents", "encoder_preset", "decoder_preset", "z_dim", "epochs", "lr", "latent_lr", "batch_size",
    "seed",        "twin_mode", "beta",         "sigma_n",         "volume_dumps",   "image_dumps"};

const std::set<std::string> kGenerationKeys{"n",          "image_size", "grid",    "snr",       "conformation_law",
                                            "seed",       "random_poses", "kernels", "max_shift", "lobe_a_offset"};

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (twin_mode != TwinMode::none && backend != BackendKind::encoder) {
    throw ConfigError("twin_mode requires backend = encoder");
  }
  if (freeze_latents && backend != BackendKind::vlt) throw ConfigError("freeze_latents requires backend = vlt");
  if (backend_init == VltInit::checkpoint && backend == BackendKind::vlt && init_checkpoint.empty()) {
    throw ConfigError("backend_init = checkpoint requires init_checkpoint");
  }
  if (z_dim == 0) throw ConfigError("z_dim must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0) || !(latent_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(sigma_n > 0.0)) throw ConfigError("sigma_n must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  kv.set("dataset", dataset);
  kv.set("backend", to_string(backend));
  kv.set("backend_init", to_string(backend_init));
  kv.set("init_checkpoint", init_checkpoint);
  kv.set("init_log_sigma", format_double(init_log_sigma));
  kv.set("zero_init_log_sigma", format_double(zero_init_log_sigma));
  kv.set("freeze_latents", freeze_latents ? "true" : "false");
  kv.set("encoder_preset", to_string(encoder_preset));
  kv.set("decoder_preset", to_string(decoder_preset));
  kv.set("z_dim", std::to_string(z_dim));
  kv.set("epochs", std::to_string(epochs));
  kv.set("lr", format_double(lr));
  kv.set("latent_lr", format_double(latent_lr));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("seed", std::to_string(seed));
  kv.set("twin_mode", to_string(twin_mode));
  kv.set("beta", format_double(beta));
  kv.set("sigma_n", format_double(sigma_n));
  kv.set("volume_dumps", std::to_string(volume_dumps));
  kv.set("image_dumps", std::to_string(image_dumps));
  return kv;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  kv.require_known(kExperimentKeys);
  ExperimentConfig c;
  c.dataset = kv.get_string("dataset", c.dataset);
  c.backend = parse_backend(kv.get_string("backend", to_string(c.backend)));
  c.backend_init = parse_vlt_init(kv.get_string("backend_init", to_string(c.backend_init)));
  c.init_checkpoint = kv.get_string("init_checkpoint", c.init_checkpoint);
  c.init_log_sigma = kv.get_double("init_log_sigma", c.init_log_sigma);
  c.zero_init_log_sigma = kv.get_double("zero_init_log_sigma", c.zero_init_log_sigma);
  c.freeze_latents = kv.get_bool("freeze_latents", c.freeze_latents);
  c.encoder_preset = parse_encoder_preset(kv.get_string("encoder_preset", to_string(c.encoder_preset)));
  c.decoder_preset = parse_encoder_preset(kv.get_string("decoder_preset", to_string(c.decoder_preset)));
  c.z_dim = kv.get_uint("z_dim", c.z_dim);
  c.epochs = kv.get_uint("epochs", c.epochs);
  c.lr = kv.get_double("lr", c.lr);
  c.latent_lr = kv.get_double("latent_lr", c.latent_lr);
  c.batch_size = kv.get_uint("batch_size", c.batch_size);
  c.seed = kv.get_uint("seed", c.seed);
  c.twin_mode = parse_twin_mode(kv.get_string("twin_mode", to_string(c.twin_mode)));
  c.beta = kv.get_double("beta", c.beta);
  c.sigma_n = kv.get_double("sigma_n", c.sigma_n);
  c.volume_dumps = kv.get_uint("volume_dumps", c.volume_dumps);
  c.image_dumps = kv.get_uint("image_dumps", c.image_dumps);
  c.validate();
  return c;
}

GenerationSpec generation_from_key_values(const KeyValues& kv) {
  kv.require_known(kGenerationKeys);
  GenerationSpec s;
  s.count = kv.get_uint("n", s.count);
  s.image_size = kv.get_uint("image_size", s.image_size);
  s.grid = kv.get_uint("grid", s.image_size);
  s.snr = kv.get_double("snr", s.snr);
  s.law = ConformationLaw::parse(kv.get_string("conformation_law", s.law.to_string()));
  s.seed = kv.get_uint("seed", s.seed);
  s.random_poses = kv.get_bool("random_poses", s.random_poses);
  s.kernel_ids = kv.get_list("kernels", s.kernel_ids);
  s.max_shift = kv.get_double("max_shift", s.max_shift);
  s.geometry.lobe_a_offset = kv.get_double("lobe_a_offset", s.geometry.lobe_a_offset);
  if (s.count < 1) throw ConfigError("n must be at least 1");
  if (!(s.snr > 0.0)) throw ConfigError("snr must be positive");
  if (s.grid < 16 || s.grid % 2 != 0) throw ConfigError("grid must be even and >= 16");
  if (s.image_size != s.grid) throw ConfigError("image_size must equal grid");
  if (s.max_shift < 0.0 || s.max_shift > static_cast<double>(s.grid) / 8.0) throw ConfigError("max_shift must be in [0, L/8]");
  for (std::size_t id : s.kernel_ids) {
    if (id >= KernelBank::standard().size()) throw ConfigError("kernel id " + std::to_string(id) + " not in the bank");
  }
  if (s.kernel_ids.empty()) throw ConfigError("kernels must list at least one id");
  return s;
}

KeyValues to_key_values(const GenerationSpec& s) {
  KeyValues kv;
  kv.set("n", std::to_string(s.count));
  kv.set("image_size", std::to_string(s.image_size));
  kv.set("grid", std::to_string(s.grid));
  kv.set("snr", format_double(s.snr));
  kv.set("conformation_law", s.law.to_string());
  kv.set("seed", std::to_string(s.seed));
  kv.set("random_poses", s.random_poses ? "true" : "false");
  kv.set("kernels", join(s.kernel_ids));
  kv.set("max_shift", format_double(s.max_shift));
  kv.set("lobe_a_offset", format_double(s.geometry.lobe_a_offset));
  return kv;
}

// --- Twins -------------------------------------------------------------------

TwinAssignment TwinAssignment::identity(std::size_t n) {
  TwinAssignment t;
  t.mode = TwinMode::permutation;
  t.partner.resize(n);
  std::iota(t.partner.begin(), t.partner.end(), std::size_t{0});
  return t;
}

Tensor TwinAssignment::twin_inputs(const Dataset& data) const {
  const std::size_t n = data.size(), p = data.image_size * data.image_size;
  Tensor out(Shape{n, p});
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    if (mode == TwinMode::permutation) {
      const auto& src = data.images.at(partner.at(i)).pixels;
      std::copy(src.begin(), src.end(), row.begin());
    } else if (mode == TwinMode::noise) {
      Rng rng(noise_seeds.at(i));
      for (double& v : row) v = noise_mean + noise_std * rng.normal();
    } else {
      std::copy(data.images[i].pixels.begin(), data.images[i].pixels.end(), row.begin());
    }
  }
  return out;
}

TwinAssignment assign_twins(TwinMode mode, const Dataset& data, std::uint64_t seed) {
  const std::size_t n = data.size();
  TwinAssignment t;
  t.mode = mode;
  Rng rng(seed, "twins");
  if (mode == TwinMode::permutation) {
    if (n < 2) throw ContractError("permutation twins need at least 2 images");
    for (;;) {
      t.partner = rng.permutation(n);
      bool fixed_point = false;
      for (std::size_t i = 0; i < n && !fixed_point; ++i) fixed_point = t.partner[i] == i;
      if (!fixed_point) break;
    }
  } else if (mode == TwinMode::noise) {
    double mean = 0.0, sq = 0.0, count = 0.0;
    for (const auto& img : data.images)
      for (double v : img.pixels) {
        mean += v;
        count += 1.0;
      }
    mean /= count;
    for (const auto& img : data.images)
      for (double v : img.pixels) sq += (v - mean) * (v - mean);
    t.noise_mean = mean;
    t.noise_std = std::sqrt(sq / count);
    t.noise_seeds.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.noise_seeds[i] = derive_seed(seed, "twin-noise", i);
  } else {
    throw ContractError("assign_twins needs permutation or noise mode");
  }
  return t;
}

// --- Model -------------------------------------------------------------------

Model::Model(const ExperimentConfig& cfg, const Dataset& data)
    : backend_(cfg.backend), mode_(data.mode), z_dim_(cfg.z_dim) {
  const std::size_t d = data.image_size;
  Rng rng(cfg.seed, "init");
  if (backend_ == BackendKind::encoder) {
    encoder_ = EncoderBackend(d * d, cfg.z_dim, hidden_widths(cfg.encoder_preset), rng);
  } else {
    vlt_ = VltBackend(data.size(), cfg.z_dim);
    switch (cfg.backend_init) {
      case VltInit::normal: vlt_.init_normal(rng, cfg.init_log_sigma); break;
      case VltInit::zeros: vlt_.init_zeros(cfg.zero_init_log_sigma); break;
      case VltInit::checkpoint: {
        std::vector<Parameter*> p{&vlt_.table()};
        load_checkpoint_into(cfg.init_checkpoint, p);
        vlt_.clamp_log_sigma();
        break;
      }
    }
    vlt_.set_frozen(cfg.freeze_latents);
  }
  if (mode_ == DatasetMode::tomographic) {
    tomo_ = TomographicDecoder(cfg.z_dim, d, hidden_widths(cfg.decoder_preset), rng);
  } else {
    pixel_ = PixelDecoder(cfg.z_dim, d, hidden_widths(cfg.decoder_preset), rng);
  }
}

EncoderBackend& Model::encoder() {
  if (backend_ != BackendKind::encoder) throw ContractError("model has no encoder backend");
  return encoder_;
}
const EncoderBackend& Model::encoder() const {
  if (backend_ != BackendKind::encoder) throw ContractError("model has no encoder backend");
  return encoder_;
}
VltBackend& Model::vlt() {
  if (backend_ != BackendKind::vlt) throw ContractError("model has no lookup-table backend");
  return vlt_;
}
const VltBackend& Model::vlt() const {
  if (backend_ != BackendKind::vlt) throw ContractError("model has no lookup-table backend");
  return vlt_;
}

std::vector<Parameter*> Model::backend_parameters() {
  if (backend_ == BackendKind::encoder) return encoder_.parameters();
  return {&vlt_.table()};
}

std::vector<Parameter*> Model::decoder_parameters() {
  return mode_ == DatasetMode::tomographic ? tomo_.parameters() : pixel_.parameters();
}

std::vector<Parameter*> Model::parameters() {
  auto p = backend_parameters();
  auto d = decoder_parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

Var Model::reconstruct(Tape& tape, Var z, std::span<const Pose> poses) {
  if (mode_ == DatasetMode::tomographic) return render(tomo_.decode(tape, z), poses);
  return pixel_.decode(tape, z);
}

Image Model::reconstruct(std::span<const double> z, const Pose& pose) const {
  if (mode_ == DatasetMode::tomographic) return render(tomo_, z, pose);
  return pixel_.decode_pixels(z);
}

// --- Training ------------------------------------------------------------------

Tensor image_matrix(const Dataset& data) {
  const std::size_t n = data.size(), p = data.image_size * data.image_size;
  Tensor out(Shape{n, p});
  for (std::size_t i = 0; i < n; ++i) std::copy(data.images[i].pixels.begin(), data.images[i].pixels.end(), out.row(i).begin());
  return out;
}

namespace {

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> idx) {
  const std::size_t c = m.cols();
  Tensor out(Shape{idx.size(), c});
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(&m[idx[i] * c], c, &out[i * c]);
  return out;
}

std::string snapshot(std::size_t epoch, std::size_t batch, std::span<const std::size_t> idx, double nll, double kl) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << " batch " << batch << " (recon " << nll << ", kl " << kl
     << "); batch indices:";
  for (std::size_t i : idx) os << ' ' << i;
  return os.str();
}

Likelihood likelihood_for(const ExperimentConfig& cfg, DatasetMode mode) {
  return mode == DatasetMode::tomographic ? Likelihood::gaussian(cfg.sigma_n) : Likelihood::bernoulli();
}

}  // namespace

Tensor RunReport::latent_means() const {
  const std::size_t n = latents.rows(), z = latents.cols() / 2;
  Tensor mu(Shape{n, z});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < z; ++j) mu.at(i, j) = latents.at(i, j);
  return mu;
}

double RunReport::final_recon() const {
  if (epochs.empty()) throw ContractError("report has no epochs");
  return epochs.back().recon;
}

BatchLoss batch_loss(Model& model, Tape& tape, const Tensor& encoder_inputs, std::span<const std::size_t> indices,
                     const Tensor& targets, std::span<const Pose> poses, const Tensor& eps, const Likelihood& lik,
                     double beta) {
  const LatentVars q = model.backend() == BackendKind::encoder
                           ? model.encoder().encode(tape, tape.constant(encoder_inputs))
                           : model.vlt().lookup(tape, indices);
  const Var z = sample_z(q, eps);
  const Var x_hat = model.reconstruct(tape, z, poses);
  BatchLoss out;
  out.log_likelihood = log_likelihood(x_hat, targets, lik);
  out.kl = kl_standard_normal(q);
  out.loss = mean(sub(scale(out.kl, beta), out.log_likelihood));
  return out;
}

RunResult train(const ExperimentConfig& cfg, const Dataset& data, const TwinAssignment* twins,
                const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  if (data.size() == 0) throw ContractError("cannot train on an empty dataset");
  if (data.mode == DatasetMode::tomographic && cfg.z_dim == 0) throw ContractError("z_dim must be positive");

  RunResult result{RunReport{}, Model(cfg, data)};
  RunReport& report = result.report;
  Model& model = result.model;
  report.config = cfg;

  const std::size_t n = data.size();
  const Tensor images = image_matrix(data);
  Tensor encoder_inputs = images;
  if (cfg.backend == BackendKind::encoder) {
    if (twins) {
      encoder_inputs = twins->twin_inputs(data);
    } else if (cfg.twin_mode != TwinMode::none) {
      encoder_inputs = assign_twins(cfg.twin_mode, data, cfg.seed).twin_inputs(data);
    }
  }

  std::vector<ParamGroup> groups;
  groups.push_back({model.decoder_parameters(), cfg.lr});
  if (cfg.backend == BackendKind::encoder) {
    groups.push_back({model.backend_parameters(), cfg.lr});
  } else if (!cfg.freeze_latents) {
    groups.push_back({model.backend_parameters(), cfg.latent_lr});
  }
  Adam optimizer(groups);
  const Likelihood lik = likelihood_for(cfg, data.mode);
  Rng eps_rng(cfg.seed, "noise");

  std::vector<Pose> poses;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = Rng(cfg.seed, "shuffle", epoch).permutation(n);
    double sum_nll = 0.0, sum_kl = 0.0, sum_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const std::size_t b = idx.size();

      Tape tape;
      poses.clear();
      for (std::size_t i : idx) poses.push_back(data.images[i].pose);
      const Tensor inputs = cfg.backend == BackendKind::encoder ? gather_rows(encoder_inputs, idx) : Tensor();
      const Tensor eps = standard_normal(Shape{b, cfg.z_dim}, eps_rng);
      const BatchLoss terms = batch_loss(model, tape, inputs, idx, gather_rows(images, idx), poses, eps, lik, cfg.beta);
      const Var& ll = terms.log_likelihood;
      const Var& kl = terms.kl;
      const Var& loss = terms.loss;

      double batch_nll = 0.0, batch_kl = 0.0;
      for (double v : ll.value().data()) batch_nll -= v;
      for (double v : kl.value().data()) batch_kl += v;
      if (!std::isfinite(loss.item())) {
        throw TrainingDiverged(snapshot(epoch, batch_no, idx, batch_nll, batch_kl));
      }
      sum_nll += batch_nll;
      sum_kl += batch_kl;
      sum_loss += loss.item() * static_cast<double>(b);

      optimizer.zero_grad();
      tape.backward(loss);
      optimizer.step();
      if (cfg.backend == BackendKind::vlt && !cfg.freeze_latents) model.vlt().clamp_log_sigma();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double dn = static_cast<double>(n);
    report.epochs.push_back({epoch + 1, sum_loss / dn, sum_nll / dn, sum_kl / dn, seconds});
    if (on_epoch) on_epoch(report.epochs.back());
  }
  if (!report.epochs.empty()) {
    double total = 0.0;
    for (const auto& e : report.epochs) total += e.seconds;
    report.mean_epoch_seconds = total / static_cast<double>(report.epochs.size());
  }
  summarize(report, model, data, encoder_inputs);
  return result;
}

RunResult evil_twin_train(const ExperimentConfig& cfg, const Dataset& data, const std::optional<TwinAssignment>& twins,
                          const EpochCallback& on_epoch) {
  if (cfg.twin_mode == TwinMode::none) throw ContractError("evil_twin_train requires twin_mode != none");
  if (twins) return train(cfg, data, &*twins, on_epoch);
  const TwinAssignment assigned = assign_twins(cfg.twin_mode, data, cfg.seed);
  return train(cfg, data, &assigned, on_epoch);
}

void summarize(RunReport& report, Model& model, const Dataset& data, const Tensor& encoder_inputs) {
  const std::size_t n = data.size();
  const std::size_t z = model.z_dim();
  report.indices.clear();
  report.truth.clear();
  for (const auto& img : data.images) {
    report.indices.push_back(img.index);
    report.truth.push_back(img.truth);
  }
  report.latents = model.backend() == BackendKind::encoder ? model.encoder().encode_all(encoder_inputs)
                                                           : model.vlt().table().value;
  const Tensor mu = report.latent_means();

  report.pca.reset();
  if (z >= 2) report.pca = latent_pca(mu);
  report.clusters.reset();
  const auto levels = data.truth_levels();
  if (levels.size() <= 20) {
    const auto labels = data.labels();
    report.clusters = cluster_metrics(mu, labels, 5);
  }

  report.volumes.clear();
  report.images.clear();
  for (std::size_t i = 0; i < std::min(n, report.config.image_dumps); ++i) {
    const auto row = mu.row(i);
    report.images.emplace_back(Image(data.image_size), model.reconstruct(row, data.images[i].pose));
    report.images.back().first.pixels = data.images[i].pixels;
  }
  if (model.mode() == DatasetMode::tomographic) {
    for (std::size_t i = 0; i < std::min(n, report.config.volume_dumps); ++i) {
      report.volumes.push_back(model.tomographic_decoder().decode_volume(mu.row(i)));
    }
  }
}

// --- Augmentation probe ----------------------------------------------------------

Augmentation Augmentation::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  int amount = 1;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      amount = std::stoi(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad augmentation '" + text + "'");
    }
  }
  if (head == "shift") return shift(amount);
  if (head == "rotate90") return rotate90(amount);
  throw ConfigError("augmentation must be shift:K or rotate90[:TURNS], got '" + text + "'");
}

std::string Augmentation::to_string() const {
  return (kind == Kind::shift ? "shift:" : "rotate90:") + std::to_string(amount);
}

std::vector<double> Augmentation::apply(std::span<const double> pixels, std::size_t d) const {
  if (pixels.size() != d * d) throw DimensionError("augmentation: image size mismatch");
  std::vector<double> out(pixels.begin(), pixels.end());
  if (kind == Kind::shift) {
    if (static_cast<std::size_t>(std::abs(amount)) >= d) {
      throw ContractError("shift " + std::to_string(amount) + " must be smaller than the image size");
    }
    const long long dd = static_cast<long long>(d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        const auto dst = static_cast<std::size_t>(((static_cast<long long>(b) + amount) % dd + dd) % dd);
        out[a * d + dst] = pixels[a * d + b];
      }
    return out;
  }
  const int turns = ((amount % 4) + 4) % 4;
  std::vector<double> tmp(d * d);
  for (int t = 0; t < turns; ++t) {
    // Clockwise quarter turn: out(a, b) = in(D-1-b, a).
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) tmp[a * d + b] = out[(d - 1 - b) * d + a];
    out.swap(tmp);
  }
  return out;
}

AugmentReport augment_probe(const Model& model, const Dataset& data, const Augmentation& aug) {
  if (model.backend() != BackendKind::encoder) {
    throw ContractError("augment_probe requires an encoder backend; a lookup table cannot embed unseen inputs");
  }
  const std::size_t n = data.size(), d = data.image_size;
  if (aug.kind == Augmentation::Kind::shift && static_cast<std::size_t>(std::abs(aug.amount)) >= d) {
    throw ContractError("shift " + std::to_string(aug.amount) + " must be smaller than the image size");
  }
  const Tensor original = image_matrix(data);
  Tensor augmented(original.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = aug.apply(original.row(i), d);
    std::copy(a.begin(), a.end(), augmented.row(i).begin());
  }
  const EncoderBackend& enc = model.encoder();
  const Tensor mu = enc.encode_means(original);
  const Tensor mu_aug = enc.encode_means(augmented);

  AugmentReport r;
  r.augmentation = aug;
  r.displacement.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < mu.cols(); ++j) s += (mu_aug.at(i, j) - mu.at(i, j)) * (mu_aug.at(i, j) - mu.at(i, j));
    r.displacement[i] = std::sqrt(s);
  }
  r.reference_scale = n >= 2 ? median(nearest_neighbor_distances(mu)) : 0.0;
  r.ratio.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (r.reference_scale > 0.0) {
      r.ratio[i] = r.displacement[i] / r.reference_scale;
    } else {
      r.ratio[i] = r.displacement[i] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
  }
  double total = 0.0;
  for (double v : r.ratio) {
    total += v;
    r.max_ratio = std::max(r.max_ratio, v);
  }
  r.mean_ratio = n ? total / static_cast<double>(n) : 0.0;
  r.median_ratio = n ? median(r.ratio) : 0.0;
  const auto labels = data.labels();
  r.accuracy_original = knn_accuracy(mu, labels, mu, labels, 5, true);
  r.accuracy_augmented = knn_accuracy(mu, labels, mu_aug, labels, 5, true);
  return r;
}

}  // namespace vaebench
