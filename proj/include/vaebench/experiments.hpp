#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaebench/config.hpp"
#include "vaebench/dataset.hpp"
#include "vaebench/decoder.hpp"
#include "vaebench/inference.hpp"
#include "vaebench/metrics.hpp"

namespace vaebench {

enum class BackendKind { encoder, vlt };
enum class TwinMode { none, permutation, noise };

std::string to_string(BackendKind kind);
std::string to_string(TwinMode mode);

struct ExperimentConfig {
  std::string dataset;  // dataset file, used by the CLI
  BackendKind backend = BackendKind::encoder;
  VltInit backend_init = VltInit::normal;
  std::string init_checkpoint;  // latent table checkpoint for backend_init = checkpoint
  double init_log_sigma = 0.0;  // log sigma of normal-initialized table rows
  double zero_init_log_sigma = -8.0;
  bool freeze_latents = false;
  EncoderPreset encoder_preset = EncoderPreset::standard;
  EncoderPreset decoder_preset = EncoderPreset::standard;
  std::size_t z_dim = 8;
  std::size_t epochs = 50;
  double lr = 1e-4;
  double latent_lr = 0.3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  TwinMode twin_mode = TwinMode::none;
  double beta = 1.0;
  double sigma_n = 1.0;
  std::size_t volume_dumps = 6;
  std::size_t image_dumps = 6;

  /// Throws ConfigError when the combination is not allowed.
  void validate() const;
  KeyValues to_key_values() const;
  /// Rejects keys that are not experiment keys.
  static ExperimentConfig from_key_values(const KeyValues& kv);
};

/// Keys accepted by gen-data.
GenerationSpec generation_from_key_values(const KeyValues& kv);
KeyValues to_key_values(const GenerationSpec& spec);

/// Fixed twin input per image, chosen once before training.
struct TwinAssignment {
  TwinMode mode = TwinMode::none;
  std::vector<std::size_t> partner;       // permutation mode
  std::vector<std::uint64_t> noise_seeds; // noise mode
  double noise_mean = 0.0;
  double noise_std = 1.0;

  /// Test hook: every image is its own twin.
  static TwinAssignment identity(std::size_t n);
  /// Encoder inputs [n, D*D] implied by the assignment.
  Tensor twin_inputs(const Dataset& data) const;
};

/// Permutation: a uniformly drawn derangement (rejection sampled).
/// Noise: per-image seeds for Gaussian images with the dataset's pixel mean and variance.
TwinAssignment assign_twins(TwinMode mode, const Dataset& data, std::uint64_t seed);

/// Encoder or lookup table plus the decoder matching the dataset mode.
class Model {
 public:
  Model(const ExperimentConfig& cfg, const Dataset& data);

  BackendKind backend() const noexcept { return backend_; }
  DatasetMode mode() const noexcept { return mode_; }
  EncoderBackend& encoder();
  const EncoderBackend& encoder() const;
  VltBackend& vlt();
  const VltBackend& vlt() const;
  TomographicDecoder& tomographic_decoder() { return tomo_; }
  const TomographicDecoder& tomographic_decoder() const { return tomo_; }
  PixelDecoder& pixel_decoder() { return pixel_; }
  const PixelDecoder& pixel_decoder() const { return pixel_; }

  std::vector<Parameter*> backend_parameters();
  std::vector<Parameter*> decoder_parameters();
  std::vector<Parameter*> parameters();

  /// x_hat for latent samples z [B, z_dim]; poses are ignored in pixel mode.
  Var reconstruct(Tape& tape, Var z, std::span<const Pose> poses);
  /// Reconstruction of a single image from a latent point.
  Image reconstruct(std::span<const double> z, const Pose& pose) const;
  std::size_t z_dim() const noexcept { return z_dim_; }

 private:
  BackendKind backend_;
  DatasetMode mode_;
  std::size_t z_dim_;
  EncoderBackend encoder_;
  VltBackend vlt_;
  TomographicDecoder tomo_;
  PixelDecoder pixel_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double neg_elbo = 0.0;
  double recon = 0.0;  // -E log p(x|z), averaged per image
  double kl = 0.0;
  double seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<EpochRecord> epochs;
  Tensor latents;  // [n, 2*z_dim]: mu then log sigma
  std::vector<std::size_t> indices;
  std::vector<double> truth;
  std::optional<PcaResult> pca;
  std::optional<ClusterMetrics> clusters;
  std::vector<Volume> volumes;              // decoded at mu of the first images
  std::vector<std::pair<Image, Image>> images;  // observed, reconstructed
  double mean_epoch_seconds = 0.0;

  Tensor latent_means() const;
  double final_recon() const;
};

struct RunResult {
  RunReport report;
  Model model;
};

/// Minibatch objective: mean over the batch of beta * KL - log p(x_i | z_i).
struct BatchLoss {
  Var loss;
  Var log_likelihood;  // [B]
  Var kl;              // [B]
};

/// `encoder_inputs` rows are fed to the encoder (ignored for a lookup table,
/// which uses `indices`); `targets` [B, D*D] are the observed images and `eps`
/// [B, z_dim] the reparameterization noise.
BatchLoss batch_loss(Model& model, Tape& tape, const Tensor& encoder_inputs, std::span<const std::size_t> indices,
                     const Tensor& targets, std::span<const Pose> poses, const Tensor& eps, const Likelihood& lik,
                     double beta);

/// Raised when the loss becomes non-finite; the message is a diagnostic snapshot of the batch.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains per the config. `twins` overrides the assignment implied by cfg.twin_mode.
/// `on_epoch` is called after each epoch.
RunResult train(const ExperimentConfig& cfg, const Dataset& data, const TwinAssignment* twins = nullptr,
                const EpochCallback& on_epoch = {});
/// train() with the encoder fed fixed twins; requires cfg.twin_mode != none.
RunResult evil_twin_train(const ExperimentConfig& cfg, const Dataset& data,
                          const std::optional<TwinAssignment>& twins = std::nullopt,
                          const EpochCallback& on_epoch = {});

/// Summaries computed after training: latent table, metrics, dumps.
void summarize(RunReport& report, Model& model, const Dataset& data, const Tensor& encoder_inputs);

struct Augmentation {
  enum class Kind { shift, rotate90 } kind = Kind::shift;
  int amount = 0;  // shift: columns to the right; rotate90: quarter turns clockwise

  static Augmentation shift(int k) { return {Kind::shift, k}; }
  static Augmentation rotate90(int turns = 1) { return {Kind::rotate90, turns}; }
  static Augmentation parse(const std::string& text);
  std::string to_string() const;
  std::vector<double> apply(std::span<const double> pixels, std::size_t d) const;
};

struct AugmentReport {
  Augmentation augmentation;
  std::vector<double> displacement;  // ||mu(aug x) - mu(x)||
  std::vector<double> ratio;         // displacement / reference_scale
  double reference_scale = 0.0;      // median nearest-neighbour distance of mu(x)
  double mean_ratio = 0.0;
  double median_ratio = 0.0;
  double max_ratio = 0.0;
  double accuracy_original = 0.0;   // leave-one-out 5-NN on mu(x)
  double accuracy_augmented = 0.0;  // mu(aug x_i) voted against mu(x_j), j != i
};

/// Requires an encoder backend: a lookup table cannot embed unseen inputs.
AugmentReport augment_probe(const Model& model, const Dataset& data, const Augmentation& aug);

/// Stack of all dataset images [n, D*D].
Tensor image_matrix(const Dataset& data);

}  // namespace vaebench
