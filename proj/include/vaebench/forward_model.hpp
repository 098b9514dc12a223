#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vaebench {

struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const;
  static Quaternion identity() { return {}; }
  /// Rotation by `angle` radians about the unit axis (ax, ay, az).
  static Quaternion from_axis_angle(double ax, double ay, double az, double angle);
};

/// Row-major 3x3 rotation matrix.
using Mat3 = std::array<double, 9>;

/// Throws ContractError unless |q| = 1 within 1e-9.
Mat3 rotation_matrix(const Quaternion& q);

/// Per-image pose: rotation, in-plane shift in pixels (axis 0, axis 1), filter id.
struct Pose {
  Quaternion rotation;
  std::array<double, 2> shift{0.0, 0.0};
  std::size_t kernel_id = 0;
};

/// Cubic voxel grid, index (i*L + j)*L + k. Axis 2 (k) is the viewing axis.
struct Volume {
  std::size_t size = 0;
  double voxel_size = 1.0;
  std::vector<double> voxels;

  Volume() = default;
  explicit Volume(std::size_t l, double fill = 0.0) : size(l), voxels(l * l * l, fill) {}

  double& at(std::size_t i, std::size_t j, std::size_t k) { return voxels[(i * size + j) * size + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return voxels[(i * size + j) * size + k]; }
  double mass() const;
};

/// Square image, index a*D + b.
struct Image {
  std::size_t size = 0;
  std::vector<double> pixels;

  Image() = default;
  explicit Image(std::size_t d, double fill = 0.0) : size(d), pixels(d * d, fill) {}

  double& at(std::size_t a, std::size_t b) { return pixels[a * size + b]; }
  double at(std::size_t a, std::size_t b) const { return pixels[a * size + b]; }
};

// --- Phantom ---------------------------------------------------------------

struct PhantomGeometry {
  /// Lobe A sits L/8 voxels before the grid center along axis 0, plus this offset,
  /// so lobe B's path is centered on the grid.
  double lobe_a_offset = 0.0;
  /// Lobe widths as a fraction of L.
  double lobe_a_width = 1.0 / 12.0;
  double lobe_b_width = 1.0 / 16.0;
};

/// Two unit-mass Gaussian lobes. Lobe B starts on lobe A and moves L/4 voxels
/// along axis 0 as conformation goes from 0 to 1.
Volume make_phantom(double conformation, std::size_t size, const PhantomGeometry& geometry = {});
/// Lobe B alone, for centroid checks.
Volume make_phantom_lobe_b(double conformation, std::size_t size, const PhantomGeometry& geometry = {});
std::array<double, 3> center_of_mass(const Volume& v);

// --- Linear imaging operators ---------------------------------------------
// Each operator has a span-level forward and exact adjoint; outputs are overwritten.

/// out(p) = in(R^T (p - c) + c), trilinear, periodic boundary, c = (L-1)/2.
void rotate_forward(std::span<const double> in, std::size_t l, const Mat3& r, std::span<double> out);
void rotate_adjoint(std::span<const double> in, std::size_t l, const Mat3& r, std::span<double> out);

/// Sum along axis 2.
void project_forward(std::span<const double> volume, std::size_t l, std::span<double> image);
void project_adjoint(std::span<const double> image, std::size_t l, std::span<double> volume);

/// out(a, b) = in(a - t0, b - t1), bilinear with circular wrap.
void translate_forward(std::span<const double> in, std::size_t d, std::array<double, 2> t, std::span<double> out);
void translate_adjoint(std::span<const double> in, std::size_t d, std::array<double, 2> t, std::span<double> out);

/// Odd-length, centered, separable kernel. Index 0 of the bank is the identity.
class KernelBank {
 public:
  KernelBank();
  explicit KernelBank(std::vector<std::vector<double>> taps);

  static const KernelBank& standard();

  std::size_t size() const noexcept { return taps_.size(); }
  /// Throws LookupError for an unknown id.
  const std::vector<double>& kernel(std::size_t id) const;

 private:
  std::vector<std::vector<double>> taps_;
};

/// Circular separable convolution along both image axes.
void convolve_forward(std::span<const double> in, std::size_t d, std::span<const double> taps, std::span<double> out);
void convolve_adjoint(std::span<const double> in, std::size_t d, std::span<const double> taps, std::span<double> out);

/// Full imaging chain h * (T_t P R_q v) and its adjoint. `scratch` sizes are managed internally.
class ImagingOperator {
 public:
  ImagingOperator(std::size_t l, const Pose& pose, const KernelBank& bank = KernelBank::standard());

  void forward(std::span<const double> volume, std::span<double> image) const;
  void adjoint(std::span<const double> image, std::span<double> volume) const;

  std::size_t grid() const noexcept { return l_; }

 private:
  std::size_t l_;
  Mat3 rotation_;
  std::array<double, 2> shift_;
  const std::vector<double>* taps_;
};

// --- Value-level conveniences ------------------------------------------------

Volume rotate_volume(const Volume& v, const Quaternion& q);
Image project(const Volume& v);
/// Throws ContractError if a shift component exceeds D/8.
Image translate_image(const Image& img, std::array<double, 2> t);
Image apply_ctf(const Image& img, std::size_t kernel_id, const KernelBank& bank = KernelBank::standard());

double signal_variance(std::span<const double> pixels);

/// White Gaussian noise with variance signal_variance(img)/snr, or
/// reference_variance/snr when given. SNR is capped at 1e12.
Image add_noise(const Image& img, double snr, std::uint64_t seed);
Image add_noise(const Image& img, double snr, std::uint64_t seed, double reference_variance);

}  // namespace vaebench
