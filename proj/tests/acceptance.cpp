// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Usage: vaebench_acceptance <work dir>
//
// Set VAEBENCH_ACCEPTANCE_REUSE=1 to keep completed reports from an earlier run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "vaebench/binary_io.hpp"
#include "vaebench/cli.hpp"
#include "vaebench/dataset.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/experiments.hpp"
#include "vaebench/forward_model.hpp"
#include "vaebench/report.hpp"
#include "vaebench/selftest.hpp"

using namespace vaebench;
namespace fs = std::filesystem;

namespace {

fs::path work;
bool reuse = false;

struct Verdict {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [failed]");
  }
};

std::string path(const std::string& name) { return (work / name).string(); }

void run_cli_checked(CommandSpec spec) {
  std::ostringstream out;
  const int status = run_command(spec, out, std::cerr);
  std::cerr << out.str();
  if (status != kExitOk) throw std::runtime_error(spec.subcommand + " failed with status " + std::to_string(status));
}

/// Trains into work/<name> unless a completed report may be reused.
void train_report(const std::string& subcommand, const std::string& name, const std::vector<std::string>& overrides) {
  if (reuse && report_complete(path(name))) return;
  CommandSpec s;
  s.subcommand = subcommand;
  s.config_paths = {path("base.cfg")};
  s.overrides = overrides;
  s.out_dir = path(name);
  s.force = true;
  run_cli_checked(s);
}

void probe_report(const std::string& report, const std::string& aug, const std::string& name) {
  if (reuse && report_complete(path(name))) return;
  CommandSpec s;
  s.subcommand = "probe";
  s.report_dir = path(report);
  s.augmentation = aug;
  s.out_dir = path(name);
  s.force = true;
  run_cli_checked(s);
}

std::vector<std::vector<std::string>> read_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::map<std::string, std::string> read_metrics(const std::string& file) {
  std::map<std::string, std::string> m;
  for (const auto& row : read_csv(file))
    if (row.size() == 2) m[row[0]] = row[1];
  return m;
}

double metric(const std::string& report, const std::string& key, const std::string& file = "metrics.csv") {
  const auto m = read_metrics((fs::path(path(report)) / file).string());
  const auto it = m.find(key);
  if (it == m.end()) throw std::runtime_error(report + "/" + file + " has no " + key);
  return std::stod(it->second);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

bool all_passed(const std::vector<CheckResult>& results, std::string& failures) {
  bool ok = true;
  for (const auto& r : results) {
    if (!r.passed) {
      ok = false;
      failures += " " + r.name + "(" + r.detail + ")";
    }
  }
  return ok;
}

void check_group(Verdict& v, const std::string& label, const std::vector<CheckResult>& results) {
  std::string failures;
  const bool ok = all_passed(results, failures);
  v.require(ok, label + ": " + std::to_string(results.size()) + " checks" + failures);
}

// --- Criteria -------------------------------------------------------------

void gradient_oracle(Verdict& v) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = gradient_checks();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check_group(v, "finite differences", results);
  v.require(seconds < 120.0, "runtime " + fmt(seconds) + " s < 120 s");
}

void operator_adjoints(Verdict& v) { check_group(v, "dense transposes at L=D=16", adjoint_checks(16)); }

void elbo_identity(Verdict& v) { check_group(v, "linear-Gaussian identity and lookup-table fit", elbo_identity_checks()); }

void kl_monte_carlo(Verdict& v) { check_group(v, "1e6-sample estimates and non-negativity", kl_checks(1'000'000)); }

void parity(Verdict& v) {
  for (const std::string name : {"encoder", "vlt"}) {
    const double knn = metric(name, "knn5_accuracy");
    const double ratio = metric(name, "centroid_separation_ratio");
    v.require(knn >= 0.9, name + " knn5 " + fmt(knn) + " >= 0.9");
    v.require(ratio >= 2.0, name + " separation " + fmt(ratio) + " >= 2");
  }
  const double te = metric("encoder", "mean_epoch_seconds", "timing.csv");
  const double tv = metric("vlt", "mean_epoch_seconds", "timing.csv");
  const double spread = std::max(te, tv) / std::min(te, tv) - 1.0;
  v.require(spread <= 0.25, "epoch seconds " + fmt(te) + " vs " + fmt(tv) + " (differ by " + fmt(100 * spread) + "%)");
}

// Lobe B moves between conformations: the positive and negative parts of the
// difference of the two cluster-centroid volumes locate it at each end.
void lobe_separation(Verdict& v) {
  const Dataset data = load_dataset(path("data.vbds"));
  const Model model = load_report_model(path("encoder"), data);
  const std::vector<int> labels = data.labels();
  const std::size_t z = model.z_dim();
  std::vector<std::vector<double>> centroid(2, std::vector<double>(z, 0.0));
  std::vector<double> count(2, 0.0);
  const Tensor latents = model.encoder().encode_means(image_matrix(data));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < z; ++k) centroid[labels[i]][k] += latents.at(i, k);
    count[labels[i]] += 1.0;
  }
  for (int c = 0; c < 2; ++c)
    for (double& x : centroid[c]) x /= count[c];
  const Volume v0 = model.tomographic_decoder().decode_volume(centroid[0]);
  const Volume v1 = model.tomographic_decoder().decode_volume(centroid[1]);
  auto lobe = [&](double sign) {
    Volume part(v0.size);
    double peak = 0.0;
    for (std::size_t i = 0; i < part.voxels.size(); ++i) {
      part.voxels[i] = std::max(0.0, sign * (v1.voxels[i] - v0.voxels[i]));
      peak = std::max(peak, part.voxels[i]);
    }
    for (double& x : part.voxels)
      if (x < 0.5 * peak) x = 0.0;
    return center_of_mass(part);
  };
  const auto a = lobe(-1.0), b = lobe(1.0);
  const double dist = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
  const double need = static_cast<double>(v0.size) / 8.0;
  v.require(dist >= need, "lobe-B centroids " + fmt(dist) + " voxels apart >= L/8 = " + fmt(need));
}

void evil_twin(Verdict& v) {
  const double base = metric("encoder", "final_recon");
  const double twin = metric("twin_large", "final_recon");
  const double rel = std::abs(twin - base) / base;
  v.require(rel <= 0.25, "permutation twin recon " + fmt(twin) + " vs baseline " + fmt(base) + " (" +
                             fmt(100 * rel) + "%)");

  GenerationSpec spec;
  spec.count = 200;
  spec.image_size = 16;
  spec.grid = 16;
  spec.seed = 4;
  const Dataset data = generate_dataset(spec);
  ExperimentConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 2;
  cfg.volume_dumps = 3;
  cfg.image_dumps = 3;
  RunResult plain = train(cfg, data);
  ExperimentConfig twin_cfg = cfg;
  twin_cfg.twin_mode = TwinMode::permutation;
  RunResult identity = evil_twin_train(twin_cfg, data, TwinAssignment::identity(data.size()));
  // The echoed configs differ in twin_mode only; compare everything else.
  identity.report.config = plain.report.config;
  write_report(path("identity_plain"), plain.report, plain.model, true);
  write_report(path("identity_twin"), identity.report, identity.model, true);
  const auto differing = compare_reports(path("identity_plain"), path("identity_twin"));
  std::string names;
  for (const auto& n : differing) names += " " + n;
  v.require(differing.empty(), "identity twin report bitwise equal to plain training" + names);
}

void frozen_consensus(Verdict& v) {
  const Dataset data = load_dataset(path("data.vbds"));
  const Model model = load_report_model(path("frozen_zero"), data);
  const Tensor table = model.vlt().table().value;
  const std::size_t z = model.z_dim();
  std::vector<double> mu(z);
  auto row_mu = [&](std::size_t i) {
    for (std::size_t k = 0; k < z; ++k) mu[k] = table.at(i, k);
    return mu;
  };
  const Volume first = model.tomographic_decoder().decode_volume(row_mu(0));
  double worst = 0.0;
  for (std::size_t i = 1; i < table.rows(); ++i) {
    const Volume vi = model.tomographic_decoder().decode_volume(row_mu(i));
    for (std::size_t j = 0; j < vi.voxels.size(); ++j) worst = std::max(worst, std::abs(vi.voxels[j] - first.voxels[j]));
  }
  v.require(worst < 1e-10, "zero-init frozen volumes over " + std::to_string(table.rows()) +
                               " rows, max voxel difference " + fmt(worst));
  const double knn = metric("frozen_checkpoint", "knn5_accuracy");
  v.require(knn >= 0.9, "checkpoint-init frozen knn5 " + fmt(knn) + " >= 0.9");
}

void probes(Verdict& v) {
  for (const std::string name : {"probe_shift0", "probe_rotate360"}) {
    const auto rows = read_csv((fs::path(path(name)) / "probe.csv").string());
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(std::stod(r.at(2))));
    v.require(rows.size() == 2000 && worst == 0.0,
              name + " " + std::to_string(rows.size()) + " rows, max displacement " + fmt(worst));
  }
  for (const std::string name : {"probe_shift1", "probe_rotate90"}) {
    const auto rows = read_csv((fs::path(path(name)) / "probe.csv").string());
    bool finite = rows.size() == 2000;
    for (const auto& r : rows) finite = finite && r.size() == 4 && std::isfinite(std::stod(r[2])) && std::isfinite(std::stod(r[3]));
    const auto m = read_metrics((fs::path(path(name)) / "probe_summary.csv").string());
    bool summary = true;
    for (const char* key : {"reference_scale", "mean_ratio", "median_ratio", "max_ratio", "knn5_accuracy_original",
                            "knn5_accuracy_augmented", "accuracy_drop"}) {
      summary = summary && m.count(key) && std::isfinite(std::stod(m.at(key)));
    }
    v.require(finite && summary, name + " complete (mean ratio " + fmt(metric(name, "mean_ratio", "probe_summary.csv")) +
                                     ", knn5 " + fmt(metric(name, "knn5_accuracy_augmented", "probe_summary.csv")) + ")");
  }
}

void determinism(Verdict& v) {
  for (const std::string name : {"encoder", "frozen_zero"}) {
    const std::string rerun = name + "_rerun";
    CommandSpec s;
    s.subcommand = "train";
    s.config_paths = {(fs::path(path(name)) / "config.txt").string()};
    s.out_dir = path(rerun);
    s.force = true;
    run_cli_checked(s);
    const auto differing = compare_reports(path(name), path(rerun));
    std::string names;
    for (const auto& n : differing) names += " " + n;
    v.require(differing.empty(), name + " re-run from config.txt bitwise identical" + names);
  }
  CommandSpec g;
  g.subcommand = "gen-data";
  g.config_paths = {path("data.cfg")};
  g.out_dir = path("data_rerun.vbds");
  run_cli_checked(g);
  v.require(read_file_bytes(path("data.vbds")) == read_file_bytes(path("data_rerun.vbds")),
            "dataset regenerated byte for byte");
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(x >> shift));
}

void idx_ingestion(Verdict& v) {
  // Three 2x3 images and their labels, written byte by byte.
  std::vector<std::uint8_t> images, labels;
  put_be32(images, 0x00000803);
  put_be32(images, 3);
  put_be32(images, 2);
  put_be32(images, 3);
  const std::vector<std::uint8_t> pixels{0, 255, 128, 1, 2, 3, 10, 20, 30, 40, 50, 60, 255, 255, 0, 0, 17, 34};
  images.insert(images.end(), pixels.begin(), pixels.end());
  put_be32(labels, 0x00000801);
  put_be32(labels, 3);
  for (std::uint8_t l : {5, 0, 9}) labels.push_back(l);

  std::string note;
  bool values = false;
  try {
    decode_idx(images, labels);
  } catch (const FormatError& e) {
    // Non-square images are rejected at the row count.
    values = e.offset() == 8;
    note = "non-square rejected at offset " + std::to_string(e.offset());
  }
  v.require(values, note.empty() ? "non-square image accepted" : note);

  images.clear();
  put_be32(images, 0x00000803);
  put_be32(images, 3);
  put_be32(images, 2);
  put_be32(images, 2);
  images.insert(images.end(), pixels.begin(), pixels.begin() + 12);
  const Dataset d = decode_idx(images, labels);
  bool exact = d.size() == 3 && d.image_size == 2;
  for (std::size_t i = 0; exact && i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) exact = exact && d.images[i].pixels[p] == pixels[4 * i + p] / 255.0;
  exact = exact && d.images[0].truth == 5.0 && d.images[1].truth == 0.0 && d.images[2].truth == 9.0;
  v.require(exact, "pixels scaled by 1/255 and labels 5,0,9");

  auto offset = [](const std::function<void()>& f) -> long {
    try {
      f();
    } catch (const FormatError& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  auto bad_magic = images;
  bad_magic[3] = 0x02;
  const long m = offset([&] { decode_idx(bad_magic, labels); });
  v.require(m == 0, "bad magic at offset " + std::to_string(m));
  auto cut = images;
  cut.resize(16 + 4 + 4 + 1);
  const long t = offset([&] { decode_idx(cut, labels); });
  v.require(t == 24, "truncated third image at offset " + std::to_string(t));
  auto few = labels;
  few.pop_back();
  const long l = offset([&] { decode_idx(images, few); });
  v.require(l == 10, "truncated labels at offset " + std::to_string(l));

  // The CLI conversion path writes a pixel-image dataset.
  write_file_atomic(path("fixture-images.idx"), images);
  write_file_atomic(path("fixture-labels.idx"), labels);
  CommandSpec g;
  g.subcommand = "gen-data";
  g.overrides = {"idx_images=" + path("fixture-images.idx"), "idx_labels=" + path("fixture-labels.idx")};
  g.out_dir = path("fixture.vbds");
  run_cli_checked(g);
  const Dataset back = load_dataset(path("fixture.vbds"));
  bool same = back.mode == DatasetMode::pixel_image && back.size() == 3;
  for (std::size_t i = 0; same && i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p)
      same = same && back.images[i].pixels[p] == static_cast<double>(static_cast<float>(d.images[i].pixels[p])) &&
             back.images[i].truth == d.images[i].truth;
  v.require(same, "gen-data conversion round trip at float32 container precision");
}

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file);
  out << text;
}

void prepare() {
  fs::create_directories(work);
  write_text(path("data.cfg"),
             "n = 2000\nimage_size = 32\ngrid = 32\nsnr = 0.1\nconformation_law = discrete:2\nseed = 1\n");
  write_text(path("base.cfg"), "dataset = " + path("data.vbds") + "\nseed = 1\nepochs = 50\nbeta = 30\n");
  if (!(reuse && fs::exists(path("data.vbds")))) {
    CommandSpec g;
    g.subcommand = "gen-data";
    g.config_paths = {path("data.cfg")};
    g.out_dir = path("data.vbds");
    run_cli_checked(g);
  }
  train_report("train", "encoder", {});
  train_report("train", "vlt", {"backend=vlt"});
  train_report("evil-twin", "twin_large", {"encoder_preset=large"});
  train_report("train", "frozen_zero", {"backend=vlt", "backend_init=zeros", "freeze_latents=true", "epochs=10"});
  train_report("train", "frozen_checkpoint",
               {"backend=vlt", "backend_init=checkpoint", "freeze_latents=true", "epochs=20",
                "init_checkpoint=" + (fs::path(path("encoder")) / "encoder_latents.ckpt").string()});
  probe_report("encoder", "shift:0", "probe_shift0");
  probe_report("encoder", "rotate90:4", "probe_rotate360");
  probe_report("encoder", "shift:1", "probe_shift1");
  probe_report("encoder", "rotate90", "probe_rotate90");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: vaebench_acceptance <work dir>\n";
    return 2;
  }
  work = fs::absolute(argv[1]);
  const char* env = std::getenv("VAEBENCH_ACCEPTANCE_REUSE");
  reuse = env != nullptr && std::string(env) == "1";

  struct Criterion {
    int id;
    const char* name;
    std::function<void(Verdict&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracle", gradient_oracle},
      {2, "operator adjoints", operator_adjoints},
      {3, "ELBO identity", elbo_identity},
      {4, "analytic KL vs Monte Carlo", kl_monte_carlo},
      {5, "lookup table and encoder parity", parity},
      {6, "evil-twin capacity", evil_twin},
      {7, "frozen lookup table consensus", frozen_consensus},
      {8, "augmentation probe mechanics", probes},
      {9, "determinism", determinism},
      {10, "IDX ingestion", idx_ingestion},
  };

  bool prepared = true;
  std::string prepare_error;
  try {
    prepare();
  } catch (const std::exception& e) {
    prepared = false;
    prepare_error = e.what();
    std::cerr << "experiment preparation failed: " << e.what() << '\n';
  }

  int failed = 0;
  auto emit = [&](const std::string& label, Verdict& v) {
    if (!v.passed) ++failed;
    std::cout << (v.passed ? "PASS " : "FAIL ") << label << ": " << v.detail.str() << std::endl;
  };
  for (const auto& c : criteria) {
    Verdict v;
    const bool needs_runs = c.id >= 5 && c.id <= 9;
    if (needs_runs && !prepared) {
      v.require(false, "experiments unavailable: " + prepare_error);
    } else {
      try {
        c.run(v);
      } catch (const std::exception& e) {
        v.require(false, std::string("error: ") + e.what());
      }
    }
    emit("criterion " + std::to_string(c.id) + " " + c.name, v);
  }
  Verdict lobes;
  try {
    if (!prepared) throw std::runtime_error(prepare_error);
    lobe_separation(lobes);
  } catch (const std::exception& e) {
    lobes.require(false, std::string("error: ") + e.what());
  }
  emit("supplementary decoded lobe separation", lobes);
  std::cout << (failed == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
