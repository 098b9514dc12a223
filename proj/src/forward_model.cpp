#include "vaebench/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vaebench/errors.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

namespace {

constexpr double kMaxSnr = 1e12;

std::size_t wrap(long long i, std::size_t n) {
  const long long m = static_cast<long long>(n);
  long long r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

void require_length(std::span<const double> s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                         std::to_string(s.size()));
  }
}

std::vector<double> gaussian_profile(std::size_t l, double center, double sigma) {
  std::vector<double> g(l);
  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

void add_lobe(Volume& v, std::array<double, 3> center, double sigma) {
  const std::size_t l = v.size;
  const auto gx = gaussian_profile(l, center[0], sigma);
  const auto gy = gaussian_profile(l, center[1], sigma);
  const auto gz = gaussian_profile(l, center[2], sigma);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j) {
      const double gij = gx[i] * gy[j];
      double* row = &v.voxels[(i * l + j) * l];
      for (std::size_t k = 0; k < l; ++k) row[k] += gij * gz[k];
    }
}

void check_phantom_args(double conformation, std::size_t size) {
  if (size < 16 || size % 2 != 0) throw ContractError("phantom grid size must be even and >= 16");
  if (!(conformation >= 0.0 && conformation <= 1.0)) {
    throw ContractError("conformation " + std::to_string(conformation) + " outside [0,1]");
  }
}

std::array<double, 3> lobe_a_center(std::size_t l, const PhantomGeometry& g) {
  const double c = (static_cast<double>(l) - 1.0) / 2.0;
  return {c - static_cast<double>(l) / 8.0 + g.lobe_a_offset, c, c};
}

std::array<double, 3> lobe_b_center(double conformation, std::size_t l, const PhantomGeometry& g) {
  auto p = lobe_a_center(l, g);
  p[0] += conformation * static_cast<double>(l) / 4.0;
  return p;
}

// Trilinear stencil of a source coordinate: 8 wrapped voxel offsets and weights.
struct Stencil {
  std::array<std::size_t, 8> index;
  std::array<double, 8> weight;
};

// Source coordinates of a rotation about the grid centre lie within [-L, 2L),
// so one conditional shift wraps them.
std::size_t wrap_near(long long i, long long l) {
  if (i < 0) return static_cast<std::size_t>(i + l);
  if (i >= l) return static_cast<std::size_t>(i - l);
  return static_cast<std::size_t>(i);
}

Stencil stencil(double sx, double sy, double sz, std::size_t l) {
  const double fx = std::floor(sx), fy = std::floor(sy), fz = std::floor(sz);
  const double wx = sx - fx, wy = sy - fy, wz = sz - fz;
  const auto n = static_cast<long long>(l);
  const auto ix = static_cast<long long>(fx), iy = static_cast<long long>(fy), iz = static_cast<long long>(fz);
  const std::size_t x0 = wrap_near(ix, n) * l * l, x1 = wrap_near(ix + 1, n) * l * l;
  const std::size_t y0 = wrap_near(iy, n) * l, y1 = wrap_near(iy + 1, n) * l;
  const std::size_t z0 = wrap_near(iz, n), z1 = wrap_near(iz + 1, n);
  const double ax0 = 1.0 - wx, ay0 = 1.0 - wy, az0 = 1.0 - wz;
  Stencil s;
  s.index = {x0 + y0 + z0, x0 + y0 + z1, x0 + y1 + z0, x0 + y1 + z1,
             x1 + y0 + z0, x1 + y0 + z1, x1 + y1 + z0, x1 + y1 + z1};
  s.weight = {ax0 * ay0 * az0, ax0 * ay0 * wz, ax0 * wy * az0, ax0 * wy * wz,
              wx * ay0 * az0,  wx * ay0 * wz,  wx * wy * az0,  wx * wy * wz};
  return s;
}

template <class Visit>
void for_each_stencil(std::size_t l, const Mat3& r, Visit&& visit) {
  const double c = (static_cast<double>(l) - 1.0) / 2.0;
  for (std::size_t i = 0; i < l; ++i) {
    const double dx = static_cast<double>(i) - c;
    for (std::size_t j = 0; j < l; ++j) {
      const double dy = static_cast<double>(j) - c;
      for (std::size_t k = 0; k < l; ++k) {
        const double dz = static_cast<double>(k) - c;
        // Source = R^T d + c.
        const double sx = r[0] * dx + r[3] * dy + r[6] * dz + c;
        const double sy = r[1] * dx + r[4] * dy + r[7] * dz + c;
        const double sz = r[2] * dx + r[5] * dy + r[8] * dz + c;
        visit((i * l + j) * l + k, stencil(sx, sy, sz, l));
      }
    }
  }
}

struct AxisShift {
  long long base;
  double frac;
};

AxisShift axis_shift(double t) {
  const double u = -t;
  const double f = std::floor(u);
  return {static_cast<long long>(f), u - f};
}

}  // namespace

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::from_axis_angle(double ax, double ay, double az, double angle) {
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  if (n == 0.0) throw ContractError("rotation axis must be nonzero");
  const double s = std::sin(angle / 2.0) / n;
  return {std::cos(angle / 2.0), ax * s, ay * s, az * s};
}

Mat3 rotation_matrix(const Quaternion& q) {
  if (std::abs(q.norm() - 1.0) > 1e-9) {
    throw ContractError("quaternion is not unit (norm " + std::to_string(q.norm()) + ")");
  }
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

double Volume::mass() const {
  double s = 0.0;
  for (double v : voxels) s += v;
  return s;
}

Volume make_phantom(double conformation, std::size_t size, const PhantomGeometry& geometry) {
  check_phantom_args(conformation, size);
  Volume v(size);
  const double l = static_cast<double>(size);
  add_lobe(v, lobe_a_center(size, geometry), geometry.lobe_a_width * l);
  add_lobe(v, lobe_b_center(conformation, size, geometry), geometry.lobe_b_width * l);
  return v;
}

Volume make_phantom_lobe_b(double conformation, std::size_t size, const PhantomGeometry& geometry) {
  check_phantom_args(conformation, size);
  Volume v(size);
  add_lobe(v, lobe_b_center(conformation, size, geometry), geometry.lobe_b_width * static_cast<double>(size));
  return v;
}

std::array<double, 3> center_of_mass(const Volume& v) {
  const std::size_t l = v.size;
  std::array<double, 3> c{0, 0, 0};
  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t k = 0; k < l; ++k) {
        const double m = v.at(i, j, k);
        c[0] += m * static_cast<double>(i);
        c[1] += m * static_cast<double>(j);
        c[2] += m * static_cast<double>(k);
        total += m;
      }
  if (total == 0.0) throw ContractError("center_of_mass of a zero-mass volume");
  for (double& x : c) x /= total;
  return c;
}

void rotate_forward(std::span<const double> in, std::size_t l, const Mat3& r, std::span<double> out) {
  require_length(in, l * l * l, "rotate_forward");
  require_length(out, l * l * l, "rotate_forward");
  for_each_stencil(l, r, [&](std::size_t p, const Stencil& s) {
    double acc = 0.0;
    for (int n = 0; n < 8; ++n) acc += s.weight[n] * in[s.index[n]];
    out[p] = acc;
  });
}

void rotate_adjoint(std::span<const double> in, std::size_t l, const Mat3& r, std::span<double> out) {
  require_length(in, l * l * l, "rotate_adjoint");
  require_length(out, l * l * l, "rotate_adjoint");
  std::fill(out.begin(), out.end(), 0.0);
  for_each_stencil(l, r, [&](std::size_t p, const Stencil& s) {
    const double g = in[p];
    if (g == 0.0) return;
    for (int n = 0; n < 8; ++n) out[s.index[n]] += s.weight[n] * g;
  });
}

void project_forward(std::span<const double> volume, std::size_t l, std::span<double> image) {
  require_length(volume, l * l * l, "project_forward");
  require_length(image, l * l, "project_forward");
  for (std::size_t p = 0; p < l * l; ++p) {
    double s = 0.0;
    const double* ray = &volume[p * l];
    for (std::size_t k = 0; k < l; ++k) s += ray[k];
    image[p] = s;
  }
}

void project_adjoint(std::span<const double> image, std::size_t l, std::span<double> volume) {
  require_length(volume, l * l * l, "project_adjoint");
  require_length(image, l * l, "project_adjoint");
  for (std::size_t p = 0; p < l * l; ++p) std::fill_n(&volume[p * l], l, image[p]);
}

void translate_forward(std::span<const double> in, std::size_t d, std::array<double, 2> t, std::span<double> out) {
  require_length(in, d * d, "translate_forward");
  require_length(out, d * d, "translate_forward");
  const AxisShift sa = axis_shift(t[0]), sb = axis_shift(t[1]);
  for (std::size_t a = 0; a < d; ++a) {
    const long long ra = static_cast<long long>(a) + sa.base;
    const std::size_t a0 = wrap(ra, d), a1 = wrap(ra + 1, d);
    for (std::size_t b = 0; b < d; ++b) {
      const long long rb = static_cast<long long>(b) + sb.base;
      const std::size_t b0 = wrap(rb, d), b1 = wrap(rb + 1, d);
      out[a * d + b] = (1.0 - sa.frac) * ((1.0 - sb.frac) * in[a0 * d + b0] + sb.frac * in[a0 * d + b1]) +
                       sa.frac * ((1.0 - sb.frac) * in[a1 * d + b0] + sb.frac * in[a1 * d + b1]);
    }
  }
}

void translate_adjoint(std::span<const double> in, std::size_t d, std::array<double, 2> t, std::span<double> out) {
  require_length(in, d * d, "translate_adjoint");
  require_length(out, d * d, "translate_adjoint");
  std::fill(out.begin(), out.end(), 0.0);
  const AxisShift sa = axis_shift(t[0]), sb = axis_shift(t[1]);
  for (std::size_t a = 0; a < d; ++a) {
    const long long ra = static_cast<long long>(a) + sa.base;
    const std::size_t a0 = wrap(ra, d), a1 = wrap(ra + 1, d);
    for (std::size_t b = 0; b < d; ++b) {
      const long long rb = static_cast<long long>(b) + sb.base;
      const std::size_t b0 = wrap(rb, d), b1 = wrap(rb + 1, d);
      const double g = in[a * d + b];
      out[a0 * d + b0] += (1.0 - sa.frac) * (1.0 - sb.frac) * g;
      out[a0 * d + b1] += (1.0 - sa.frac) * sb.frac * g;
      out[a1 * d + b0] += sa.frac * (1.0 - sb.frac) * g;
      out[a1 * d + b1] += sa.frac * sb.frac * g;
    }
  }
}

KernelBank::KernelBank()
    : KernelBank({{1.0}, {0.25, 0.5, 0.25}, {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16}}) {}

KernelBank::KernelBank(std::vector<std::vector<double>> taps) : taps_(std::move(taps)) {
  for (const auto& k : taps_) {
    if (k.empty() || k.size() % 2 == 0) throw ContractError("kernel length must be odd");
  }
}

const KernelBank& KernelBank::standard() {
  static const KernelBank bank;
  return bank;
}

const std::vector<double>& KernelBank::kernel(std::size_t id) const {
  if (id >= taps_.size()) {
    throw LookupError("kernel id " + std::to_string(id) + " not in bank of " + std::to_string(taps_.size()));
  }
  return taps_[id];
}

namespace {

// One circular 1-D pass along the given axis; `adjoint` flips the tap direction.
void convolve_axis(std::span<const double> in, std::size_t d, std::span<const double> taps, std::span<double> out,
                   int axis, bool adjoint) {
  const long long half = static_cast<long long>(taps.size() / 2);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t j = 0; j < taps.size(); ++j) {
        const long long off = adjoint ? static_cast<long long>(j) - half : half - static_cast<long long>(j);
        const std::size_t aa = axis == 0 ? wrap(static_cast<long long>(a) + off, d) : a;
        const std::size_t bb = axis == 1 ? wrap(static_cast<long long>(b) + off, d) : b;
        acc += taps[j] * in[aa * d + bb];
      }
      out[a * d + b] = acc;
    }
}

}  // namespace

void convolve_forward(std::span<const double> in, std::size_t d, std::span<const double> taps, std::span<double> out) {
  require_length(in, d * d, "convolve_forward");
  require_length(out, d * d, "convolve_forward");
  if (taps.size() == 1) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = taps[0] * in[i];
    return;
  }
  std::vector<double> tmp(d * d);
  convolve_axis(in, d, taps, tmp, 0, false);
  convolve_axis(tmp, d, taps, out, 1, false);
}

void convolve_adjoint(std::span<const double> in, std::size_t d, std::span<const double> taps, std::span<double> out) {
  require_length(in, d * d, "convolve_adjoint");
  require_length(out, d * d, "convolve_adjoint");
  if (taps.size() == 1) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = taps[0] * in[i];
    return;
  }
  std::vector<double> tmp(d * d);
  convolve_axis(in, d, taps, tmp, 1, true);
  convolve_axis(tmp, d, taps, out, 0, true);
}

ImagingOperator::ImagingOperator(std::size_t l, const Pose& pose, const KernelBank& bank)
    : l_(l), rotation_(rotation_matrix(pose.rotation)), shift_(pose.shift), taps_(&bank.kernel(pose.kernel_id)) {}

void ImagingOperator::forward(std::span<const double> volume, std::span<double> image) const {
  std::vector<double> rotated(l_ * l_ * l_), a(l_ * l_), b(l_ * l_);
  rotate_forward(volume, l_, rotation_, rotated);
  project_forward(rotated, l_, a);
  translate_forward(a, l_, shift_, b);
  convolve_forward(b, l_, *taps_, image);
}

void ImagingOperator::adjoint(std::span<const double> image, std::span<double> volume) const {
  std::vector<double> rotated(l_ * l_ * l_), a(l_ * l_), b(l_ * l_);
  convolve_adjoint(image, l_, *taps_, a);
  translate_adjoint(a, l_, shift_, b);
  project_adjoint(b, l_, rotated);
  rotate_adjoint(rotated, l_, rotation_, volume);
}

Volume rotate_volume(const Volume& v, const Quaternion& q) {
  Volume out(v.size);
  out.voxel_size = v.voxel_size;
  rotate_forward(v.voxels, v.size, rotation_matrix(q), out.voxels);
  return out;
}

Image project(const Volume& v) {
  Image img(v.size);
  project_forward(v.voxels, v.size, img.pixels);
  return img;
}

Image translate_image(const Image& img, std::array<double, 2> t) {
  const double limit = static_cast<double>(img.size) / 8.0;
  if (std::abs(t[0]) > limit || std::abs(t[1]) > limit) {
    throw ContractError("translation exceeds D/8 = " + std::to_string(limit) + " pixels");
  }
  Image out(img.size);
  translate_forward(img.pixels, img.size, t, out.pixels);
  return out;
}

Image apply_ctf(const Image& img, std::size_t kernel_id, const KernelBank& bank) {
  Image out(img.size);
  convolve_forward(img.pixels, img.size, bank.kernel(kernel_id), out.pixels);
  return out;
}

double signal_variance(std::span<const double> pixels) {
  if (pixels.empty()) return 0.0;
  double mean = 0.0;
  for (double v : pixels) mean += v;
  mean /= static_cast<double>(pixels.size());
  double var = 0.0;
  for (double v : pixels) var += (v - mean) * (v - mean);
  return var / static_cast<double>(pixels.size());
}

Image add_noise(const Image& img, double snr, std::uint64_t seed) {
  return add_noise(img, snr, seed, signal_variance(img.pixels));
}

Image add_noise(const Image& img, double snr, std::uint64_t seed, double reference_variance) {
  if (!(snr > 0.0)) throw ContractError("snr must be positive, got " + std::to_string(snr));
  const double sigma = std::sqrt(reference_variance / std::min(snr, kMaxSnr));
  Rng rng(seed);
  Image out = img;
  for (double& p : out.pixels) p += sigma * rng.normal();
  return out;
}

}  // namespace vaebench
