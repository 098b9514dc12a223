#pragma once

#include <string>
#include <vector>

#include "vaebench/experiments.hpp"

namespace vaebench {

// Report directory layout:
//   config.txt            resolved experiment config, re-runnable as --config
//   losses.csv            epoch,neg_elbo,recon,kl,seconds
//   latents.csv           index,truth,mu_1..mu_z,pca1,pca2
//   latent_table.csv      index,mu_1..mu_z,log_sigma_1..log_sigma_z
//   reference_points.csv  the first ten images' rows of latents.csv
//   metrics.csv           metric,value
//   timing.csv            metric,value (wall clock, excluded from comparisons)
//   model.ckpt            all parameters; latents.ckpt holds the backend alone
//   volumes/volume_K.f32  float32 LE voxels, with volume_K.txt sidecar
//   images/observed_K.pgm, images/recon_K.pgm
//   COMPLETE              written last

/// Raised when the target directory holds a completed report and force is not set.
class ReportExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes into a temporary sibling directory and renames it into place.
void write_report(const std::string& dir, const RunReport& report, Model& model, bool force = false);

bool report_complete(const std::string& dir);
ExperimentConfig load_report_config(const std::string& dir);
/// Rebuilds the trained model for `data` from a report directory.
Model load_report_model(const std::string& dir, const Dataset& data);

/// Writes probe.csv (index,truth,displacement,ratio) and probe_summary.csv.
void write_probe_report(const std::string& dir, const AugmentReport& report, const Dataset& data,
                        bool force = false);

/// Byte comparison of two report trees. The seconds column of losses.csv and
/// timing.csv are masked. Returns the differing relative paths.
std::vector<std::string> compare_reports(const std::string& a, const std::string& b);

std::string losses_csv(const RunReport& report);
std::string latents_csv(const RunReport& report, std::size_t max_rows = static_cast<std::size_t>(-1));
std::string metrics_csv(const RunReport& report);
std::string volume_sidecar(const Volume& v);
std::vector<std::uint8_t> volume_bytes(const Volume& v);
/// Binary PGM (P5, maxval 255), min-max scaled; a constant image maps to 0.
std::vector<std::uint8_t> pgm_bytes(const Image& img);

}  // namespace vaebench
