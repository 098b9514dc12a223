#pragma once

#include <span>
#include <vector>

#include "vaebench/autodiff.hpp"
#include "vaebench/forward_model.hpp"
#include "vaebench/mlp.hpp"

namespace vaebench {

/// z -> L^3 voxel grid. Poses are applied after decoding, by render().
class TomographicDecoder {
 public:
  TomographicDecoder() = default;
  TomographicDecoder(std::size_t z_dim, std::size_t grid, std::vector<std::size_t> hidden, Rng& rng);

  /// [B, z_dim] -> [B, L^3].
  Var decode(Tape& tape, Var z);
  Volume decode_volume(std::span<const double> z) const;

  std::size_t grid() const noexcept { return grid_; }
  std::size_t z_dim() const { return mlp_.input_width(); }
  Mlp& network() noexcept { return mlp_; }
  const Mlp& network() const noexcept { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }

 private:
  Mlp mlp_;
  std::size_t grid_ = 0;
};

/// Batched imaging chain on decoded volumes [B, L^3] with one pose per row -> [B, L^2].
/// Differentiable with respect to the volumes.
Var render(Var volumes, std::span<const Pose> poses, const KernelBank& bank = KernelBank::standard());
/// x_hat = h * (T P R V(z)) for a single latent.
Image render(const TomographicDecoder& decoder, std::span<const double> z, const Pose& pose);

/// z -> D*D pixels squashed into (0, 1).
class PixelDecoder {
 public:
  PixelDecoder() = default;
  PixelDecoder(std::size_t z_dim, std::size_t image_size, std::vector<std::size_t> hidden, Rng& rng);

  /// [B, z_dim] -> [B, D*D], after the sigmoid.
  Var decode(Tape& tape, Var z);
  Image decode_pixels(std::span<const double> z) const;

  std::size_t image_size() const noexcept { return image_size_; }
  std::size_t z_dim() const { return mlp_.input_width(); }
  Mlp& network() noexcept { return mlp_; }
  const Mlp& network() const noexcept { return mlp_; }
  std::vector<Parameter*> parameters() { return mlp_.parameters(); }

 private:
  Mlp mlp_;
  std::size_t image_size_ = 0;
};

}  // namespace vaebench
