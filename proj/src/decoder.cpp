#include "vaebench/decoder.hpp"

#include <cmath>

#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

std::vector<std::size_t> widths_for(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Tensor row_tensor(std::span<const double> z) { return Tensor(Shape{1, z.size()}, std::vector<double>(z.begin(), z.end())); }

}  // namespace

TomographicDecoder::TomographicDecoder(std::size_t z_dim, std::size_t grid, std::vector<std::size_t> hidden, Rng& rng)
    : mlp_("decoder", widths_for(z_dim, hidden, grid * grid * grid), rng), grid_(grid) {}

Var TomographicDecoder::decode(Tape& tape, Var z) { return mlp_.forward(tape, z); }

Volume TomographicDecoder::decode_volume(std::span<const double> z) const {
  if (z.size() != z_dim()) throw ContractError("decoder latent width mismatch");
  const Tensor out = mlp_.evaluate(row_tensor(z));
  Volume v(grid_);
  std::copy(out.data().begin(), out.data().end(), v.voxels.begin());
  return v;
}

Var render(Var volumes, std::span<const Pose> poses, const KernelBank& bank) {
  const Tensor& v = volumes.value();
  const std::size_t batch = v.rows();
  if (poses.size() != batch) throw DimensionError("render: one pose per volume required");
  const auto l = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(v.cols()))));
  if (l * l * l != v.cols()) throw DimensionError("render: rows are not cubic grids");

  std::vector<ImagingOperator> ops;
  ops.reserve(batch);
  for (const Pose& p : poses) ops.emplace_back(l, p, bank);

  Tensor out(Shape{batch, l * l});
  for (std::size_t b = 0; b < batch; ++b) ops[b].forward(v.row(b), out.row(b));
  return volumes.tape().record(std::move(out), {volumes.id()},
                               [ops = std::move(ops), l](const Tape&, const Tensor& g, std::span<Tensor* const> gi) {
                                 std::vector<double> tmp(l * l * l);
                                 for (std::size_t b = 0; b < ops.size(); ++b) {
                                   ops[b].adjoint(g.row(b), tmp);
                                   auto dst = gi[0]->row(b);
                                   for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += tmp[i];
                                 }
                               });
}

Image render(const TomographicDecoder& decoder, std::span<const double> z, const Pose& pose) {
  const Volume v = decoder.decode_volume(z);
  Image img(decoder.grid());
  ImagingOperator(decoder.grid(), pose).forward(v.voxels, img.pixels);
  return img;
}

PixelDecoder::PixelDecoder(std::size_t z_dim, std::size_t image_size, std::vector<std::size_t> hidden, Rng& rng)
    : mlp_("decoder", widths_for(z_dim, hidden, image_size * image_size), rng), image_size_(image_size) {}

Var PixelDecoder::decode(Tape& tape, Var z) { return sigmoid(mlp_.forward(tape, z)); }

Image PixelDecoder::decode_pixels(std::span<const double> z) const {
  if (z.size() != z_dim()) throw ContractError("decoder latent width mismatch");
  const Tensor logits = mlp_.evaluate(row_tensor(z));
  Image img(image_size_);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = logits[i];
    img.pixels[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return img;
}

}  // namespace vaebench
