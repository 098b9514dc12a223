#include "vaebench/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "vaebench/binary_io.hpp"
#include "vaebench/checkpoint.hpp"
#include "vaebench/errors.hpp"

namespace fs = std::filesystem;

namespace vaebench {

namespace {

constexpr const char* kMarker = "COMPLETE";

std::string csv_double(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  write_file_atomic(p.string(), bytes);
}

void write_text(const fs::path& p, const std::string& text) { write_text_atomic(p.string(), text); }

fs::path staging_dir(const fs::path& target) {
  return target.parent_path() / (target.filename().string() + ".partial" + std::to_string(::getpid()));
}

/// Moves a fully written staging directory onto `target`.
void publish(const fs::path& staging, const fs::path& target, bool force) {
  if (fs::exists(target)) {
    if (report_complete(target.string()) && !force) {
      fs::remove_all(staging);
      throw ReportExists("refusing to overwrite completed report '" + target.string() + "' (use --force)");
    }
    fs::remove_all(target);
  }
  fs::rename(staging, target);
}

fs::path prepare_staging(const std::string& dir, bool force) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  if (report_complete(target.string()) && !force) {
    throw ReportExists("refusing to overwrite completed report '" + target.string() + "' (use --force)");
  }
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  const fs::path staging = staging_dir(target);
  fs::remove_all(staging);
  fs::create_directories(staging);
  return staging;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string drop_last_column(const std::string& text) {
  std::string out;
  for (const auto& line : split_lines(text)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

}  // namespace

std::string losses_csv(const RunReport& report) {
  std::string s = "epoch,neg_elbo,recon,kl,seconds\n";
  for (const auto& e : report.epochs) {
    s += std::to_string(e.epoch) + ',' + csv_double(e.neg_elbo) + ',' + csv_double(e.recon) + ',' + csv_double(e.kl) +
         ',' + csv_double(e.seconds) + '\n';
  }
  return s;
}

std::string latents_csv(const RunReport& report, std::size_t max_rows) {
  const Tensor mu = report.latent_means();
  const std::size_t z = mu.cols();
  std::string s = "index,truth";
  for (std::size_t j = 0; j < z; ++j) s += ",mu_" + std::to_string(j + 1);
  s += ",pca1,pca2\n";
  const std::size_t rows = std::min(max_rows, mu.rows());
  for (std::size_t i = 0; i < rows; ++i) {
    s += std::to_string(report.indices.at(i)) + ',' + csv_double(report.truth.at(i));
    for (std::size_t j = 0; j < z; ++j) s += ',' + csv_double(mu.at(i, j));
    if (report.pca) {
      s += ',' + csv_double(report.pca->coords.at(i, 0)) + ',' + csv_double(report.pca->coords.at(i, 1));
    } else {
      s += ',' + csv_double(z >= 1 ? mu.at(i, 0) : 0.0) + ",0";
    }
    s += '\n';
  }
  return s;
}

namespace {

std::string latent_table_csv(const RunReport& report) {
  const std::size_t z = report.latents.cols() / 2;
  std::string s = "index";
  for (std::size_t j = 0; j < z; ++j) s += ",mu_" + std::to_string(j + 1);
  for (std::size_t j = 0; j < z; ++j) s += ",log_sigma_" + std::to_string(j + 1);
  s += '\n';
  for (std::size_t i = 0; i < report.latents.rows(); ++i) {
    s += std::to_string(report.indices.at(i));
    for (double v : report.latents.row(i)) s += ',' + csv_double(v);
    s += '\n';
  }
  return s;
}

}  // namespace

std::string metrics_csv(const RunReport& report) {
  std::string s = "metric,value\n";
  auto add = [&](const std::string& k, const std::string& v) { s += k + ',' + v + '\n'; };
  add("images", std::to_string(report.latents.rows()));
  add("epochs", std::to_string(report.epochs.size()));
  if (!report.epochs.empty()) {
    add("initial_recon", csv_double(report.epochs.front().recon));
    add("final_recon", csv_double(report.epochs.back().recon));
    add("final_neg_elbo", csv_double(report.epochs.back().neg_elbo));
    add("final_kl", csv_double(report.epochs.back().kl));
  }
  if (report.clusters) {
    add("classes", std::to_string(report.clusters->classes));
    add("knn5_accuracy", csv_double(report.clusters->knn_accuracy));
    add("centroid_separation_ratio",
        report.clusters->ratio_defined ? csv_double(report.clusters->centroid_separation_ratio) : "undefined");
  }
  if (report.pca) {
    add("pca_explained_1", csv_double(report.pca->explained.at(0)));
    add("pca_explained_2", csv_double(report.pca->explained.size() > 1 ? report.pca->explained[1] : 0.0));
    add("pca_degenerate", report.pca->degenerate ? "true" : "false");
  }
  return s;
}

std::string volume_sidecar(const Volume& v) {
  return "L = " + std::to_string(v.size) + "\nvoxel_size = " + format_double(v.voxel_size) + "\n";
}

std::vector<std::uint8_t> volume_bytes(const Volume& v) {
  ByteWriter w;
  for (double x : v.voxels) w.put_f32(static_cast<float>(x));
  return w.bytes();
}

std::vector<std::uint8_t> pgm_bytes(const Image& img) {
  const std::string header = "P5\n" + std::to_string(img.size) + ' ' + std::to_string(img.size) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double low = img.pixels.empty() ? 0.0 : *lo;
  const double range = img.pixels.empty() ? 0.0 : *hi - *lo;
  for (double p : img.pixels) {
    const double scaled = range > 0.0 ? std::round(255.0 * (p - low) / range) : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0)));
  }
  return out;
}

bool report_complete(const std::string& dir) { return fs::exists(fs::path(dir) / kMarker); }

void write_report(const std::string& dir, const RunReport& report, Model& model, bool force) {
  const fs::path staging = prepare_staging(dir, force);
  try {
    write_text(staging / "config.txt", report.config.to_key_values().to_text());
    write_text(staging / "losses.csv", losses_csv(report));
    write_text(staging / "latents.csv", latents_csv(report));
    write_text(staging / "latent_table.csv", latent_table_csv(report));
    write_text(staging / "reference_points.csv", latents_csv(report, 10));
    write_text(staging / "metrics.csv", metrics_csv(report));
    write_text(staging / "timing.csv", "metric,value\nmean_epoch_seconds," + csv_double(report.mean_epoch_seconds) + "\n");
    const auto params = model.parameters();
    save_checkpoint((staging / "model.ckpt").string(), params);
    const auto backend = model.backend_parameters();
    save_checkpoint((staging / "latents.ckpt").string(), backend);
    if (model.backend() == BackendKind::encoder) {
      // The encoder's latent means and log sigmas, in the lookup-table layout,
      // so a table can be initialized from them.
      const NamedTensor table{"vlt.table", report.latents};
      save_checkpoint((staging / "encoder_latents.ckpt").string(), std::span<const NamedTensor>(&table, 1));
    }
    if (!report.volumes.empty()) fs::create_directories(staging / "volumes");
    for (std::size_t k = 0; k < report.volumes.size(); ++k) {
      const std::string stem = "volume_" + std::to_string(k);
      write_bytes(staging / "volumes" / (stem + ".f32"), volume_bytes(report.volumes[k]));
      write_text(staging / "volumes" / (stem + ".txt"), volume_sidecar(report.volumes[k]));
    }
    if (!report.images.empty()) fs::create_directories(staging / "images");
    for (std::size_t k = 0; k < report.images.size(); ++k) {
      write_bytes(staging / "images" / ("observed_" + std::to_string(k) + ".pgm"), pgm_bytes(report.images[k].first));
      write_bytes(staging / "images" / ("recon_" + std::to_string(k) + ".pgm"), pgm_bytes(report.images[k].second));
    }
    write_text(staging / kMarker, "");
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  publish(staging, fs::absolute(dir).lexically_normal(), force);
}

ExperimentConfig load_report_config(const std::string& dir) {
  const fs::path p = fs::path(dir) / "config.txt";
  if (!fs::exists(p)) throw ConfigError("no config.txt in report '" + dir + "'");
  return ExperimentConfig::from_key_values(KeyValues::load(p.string()));
}

Model load_report_model(const std::string& dir, const Dataset& data) {
  ExperimentConfig cfg = load_report_config(dir);
  // The stored parameters replace whatever the init mode would have produced.
  if (cfg.backend == BackendKind::vlt) cfg.backend_init = VltInit::zeros;
  Model model(cfg, data);
  const auto params = model.parameters();
  load_checkpoint_into((fs::path(dir) / "model.ckpt").string(), params);
  return model;
}

void write_probe_report(const std::string& dir, const AugmentReport& r, const Dataset& data, bool force) {
  const fs::path staging = prepare_staging(dir, force);
  try {
    std::string rows = "index,truth,displacement,ratio\n";
    for (std::size_t i = 0; i < r.displacement.size(); ++i) {
      rows += std::to_string(data.images.at(i).index) + ',' + csv_double(data.images[i].truth) + ',' +
              csv_double(r.displacement[i]) + ',' + csv_double(r.ratio[i]) + '\n';
    }
    write_text(staging / "probe.csv", rows);
    std::string s = "metric,value\n";
    s += "augmentation," + r.augmentation.to_string() + '\n';
    s += "images," + std::to_string(r.displacement.size()) + '\n';
    s += "reference_scale," + csv_double(r.reference_scale) + '\n';
    s += "mean_ratio," + csv_double(r.mean_ratio) + '\n';
    s += "median_ratio," + csv_double(r.median_ratio) + '\n';
    s += "max_ratio," + csv_double(r.max_ratio) + '\n';
    s += "knn5_accuracy_original," + csv_double(r.accuracy_original) + '\n';
    s += "knn5_accuracy_augmented," + csv_double(r.accuracy_augmented) + '\n';
    s += "accuracy_drop," + csv_double(r.accuracy_original - r.accuracy_augmented) + '\n';
    write_text(staging / "probe_summary.csv", s);
    write_text(staging / kMarker, "");
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  publish(staging, fs::absolute(dir).lexically_normal(), force);
}

std::vector<std::string> compare_reports(const std::string& a, const std::string& b) {
  std::vector<std::string> names;
  for (const fs::path& root : {fs::path(a), fs::path(b)}) {
    if (!fs::is_directory(root)) throw ContractError("not a report directory: '" + root.string() + "'");
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) names.push_back(fs::relative(e.path(), root).generic_string());
    }
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  std::vector<std::string> differing;
  for (const auto& name : names) {
    if (name == "timing.csv") continue;
    const fs::path pa = fs::path(a) / name, pb = fs::path(b) / name;
    if (!fs::exists(pa) || !fs::exists(pb)) {
      differing.push_back(name);
      continue;
    }
    auto ba = read_file_bytes(pa.string()), bb = read_file_bytes(pb.string());
    if (name == "losses.csv") {
      const bool same = drop_last_column(std::string(ba.begin(), ba.end())) ==
                        drop_last_column(std::string(bb.begin(), bb.end()));
      if (!same) differing.push_back(name);
    } else if (ba != bb) {
      differing.push_back(name);
    }
  }
  return differing;
}

}  // namespace vaebench
