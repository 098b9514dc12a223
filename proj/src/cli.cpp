#include "vaebench/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sys/wait.h>
#include <unistd.h>

#include "vaebench/binary_io.hpp"
#include "vaebench/dataset.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/experiments.hpp"
#include "vaebench/report.hpp"
#include "vaebench/selftest.hpp"

namespace fs = std::filesystem;

namespace vaebench {

namespace {

/// Thrown for unmet preconditions that are the caller's fault (status 2).
class Precondition : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  std::string quoted;
  for (char c : s) {
    if (c == '"' || c == '\\') quoted += '\\';
    quoted += c;
  }
  return quoted;
}

KeyValues resolve(const std::string& config_path, const std::vector<std::string>& overrides) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
  kv.apply_overrides(overrides);
  return kv;
}

void require_out(const CommandSpec& spec) {
  if (spec.out_dir.empty()) throw ConfigError(spec.subcommand + " requires --out");
}

Dataset load_training_data(const std::string& path) {
  if (path.empty()) throw ConfigError("config key 'dataset' is required");
  if (!fs::exists(path)) throw Precondition("dataset file '" + path + "' does not exist");
  return load_dataset(path);
}

int gen_data(const CommandSpec& spec, std::ostream& out) {
  require_out(spec);
  const KeyValues kv = resolve(spec.config_paths.empty() ? "" : spec.config_paths.front(), spec.overrides);
  Dataset data;
  if (kv.has("idx_images") || kv.has("idx_labels")) {
    kv.require_known({"idx_images", "idx_labels", "n"});
    const std::string images = kv.get_string("idx_images", ""), labels = kv.get_string("idx_labels", "");
    if (images.empty() || labels.empty()) throw ConfigError("IDX conversion needs idx_images and idx_labels");
    for (const auto& p : {images, labels})
      if (!fs::exists(p)) throw Precondition("IDX file '" + p + "' does not exist");
    data = load_idx(images, labels);
    const std::size_t n = kv.get_uint("n", data.size());
    if (n < data.size()) data.images.resize(n);
  } else {
    data = generate_dataset(generation_from_key_values(kv));
  }
  const fs::path target(spec.out_dir);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  save_dataset(spec.out_dir, data);
  out << "wrote dataset " << spec.out_dir << " images=" << data.size() << " size=" << data.image_size << '\n';
  return kExitOk;
}

int train_one(const CommandSpec& spec, const std::string& config_path, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  KeyValues kv = resolve(config_path, spec.overrides);
  if (spec.subcommand == "evil-twin" && kv.get_string("twin_mode", "none") == "none") kv.set("twin_mode", "permutation");
  const ExperimentConfig cfg = ExperimentConfig::from_key_values(kv);
  if (spec.subcommand == "evil-twin" && cfg.backend != BackendKind::encoder) {
    throw ConfigError("evil-twin requires backend = encoder");
  }
  if (report_complete(out_dir) && !spec.force) {
    throw ReportExists("refusing to overwrite completed report '" + out_dir + "' (use --force)");
  }
  if (cfg.backend_init == VltInit::checkpoint && cfg.backend == BackendKind::vlt && !fs::exists(cfg.init_checkpoint)) {
    throw Precondition("init_checkpoint '" + cfg.init_checkpoint + "' does not exist");
  }
  const Dataset data = load_training_data(cfg.dataset);
  const EpochCallback progress = [&](const EpochRecord& e) {
    err << out_dir << ": epoch " << e.epoch << '/' << cfg.epochs << " neg_elbo=" << format_double(e.neg_elbo)
        << " recon=" << format_double(e.recon) << " kl=" << format_double(e.kl) << '\n';
    err.flush();
  };
  RunResult run = cfg.twin_mode == TwinMode::none ? train(cfg, data, nullptr, progress)
                                                  : evil_twin_train(cfg, data, std::nullopt, progress);
  write_report(out_dir, run.report, run.model, spec.force);
  out << "wrote report " << out_dir << " epochs=" << run.report.epochs.size();
  if (!run.report.epochs.empty()) out << " final_recon=" << format_double(run.report.final_recon());
  if (run.report.clusters) out << " knn5=" << format_double(run.report.clusters->knn_accuracy);
  out << '\n';
  return kExitOk;
}

int train_many(const CommandSpec& spec, std::ostream& out, std::ostream& err);

int train_command(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  require_out(spec);
  if (spec.config_paths.size() <= 1) {
    return train_one(spec, spec.config_paths.empty() ? "" : spec.config_paths.front(), spec.out_dir, out, err);
  }
  return train_many(spec, out, err);
}

int probe_command(const CommandSpec& spec, std::ostream& out) {
  require_out(spec);
  if (spec.report_dir.empty()) throw ConfigError("probe requires --report");
  if (spec.augmentation.empty()) throw ConfigError("probe requires --aug");
  if (!report_complete(spec.report_dir)) throw Precondition("'" + spec.report_dir + "' is not a completed report");
  KeyValues kv = KeyValues::load((fs::path(spec.report_dir) / "config.txt").string());
  kv.apply_overrides(spec.overrides);
  const ExperimentConfig cfg = ExperimentConfig::from_key_values(kv);
  if (cfg.backend != BackendKind::encoder) {
    throw Precondition("probe requires a report trained with backend=encoder; '" + spec.report_dir +
                       "' was trained with backend=" + to_string(cfg.backend));
  }
  const Augmentation aug = Augmentation::parse(spec.augmentation);
  const Dataset data = load_training_data(cfg.dataset);
  const Model model = load_report_model(spec.report_dir, data);
  const AugmentReport r = augment_probe(model, data, aug);
  write_probe_report(spec.out_dir, r, data, spec.force);
  out << "wrote probe " << spec.out_dir << " aug=" << aug.to_string() << " mean_ratio=" << format_double(r.mean_ratio)
      << " knn5_original=" << format_double(r.accuracy_original)
      << " knn5_augmented=" << format_double(r.accuracy_augmented) << '\n';
  return kExitOk;
}

int report_command(const CommandSpec& spec, std::ostream& out) {
  if (spec.report_dir.empty()) throw ConfigError("report requires --report");
  if (!report_complete(spec.report_dir)) throw Precondition("'" + spec.report_dir + "' is not a completed report");
  if (!spec.compare_dir.empty()) {
    const auto differing = compare_reports(spec.report_dir, spec.compare_dir);
    for (const auto& name : differing) out << "differs " << name << '\n';
    out << (differing.empty() ? "reports identical" : "reports differ") << '\n';
    return differing.empty() ? kExitOk : kExitRuntime;
  }
  for (const char* name : {"metrics.csv", "timing.csv"}) {
    const fs::path p = fs::path(spec.report_dir) / name;
    if (!fs::exists(p)) continue;
    const auto bytes = read_file_bytes(p.string());
    out << std::string(bytes.begin(), bytes.end());
  }
  return kExitOk;
}

int dispatch(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  if (spec.subcommand == "gen-data") return gen_data(spec, out);
  if (spec.subcommand == "train" || spec.subcommand == "evil-twin") return train_command(spec, out, err);
  if (spec.subcommand == "probe") return probe_command(spec, out);
  if (spec.subcommand == "report") return report_command(spec, out);
  if (spec.subcommand == "selftest") return run_selftest(out);
  throw ConfigError("unknown subcommand '" + spec.subcommand + "'");
}

int train_many(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  // One child process per config, at most `jobs` at a time; each report goes to
  // <out>/<config stem>.
  std::vector<std::pair<std::string, std::string>> runs;
  for (const auto& path : spec.config_paths) {
    runs.emplace_back(path, (fs::path(spec.out_dir) / fs::path(path).stem()).string());
  }
  fs::create_directories(spec.out_dir);
  out.flush();
  err.flush();
  std::size_t next = 0, running = 0;
  int status = kExitOk;
  auto reap = [&] {
    int ws = 0;
    if (::wait(&ws) > 0) {
      --running;
      const int code = WIFEXITED(ws) ? WEXITSTATUS(ws) : kExitRuntime;
      status = std::max(status, code);
    }
  };
  while (next < runs.size() || running > 0) {
    if (next < runs.size() && running < std::max<std::size_t>(1, spec.jobs)) {
      const auto [config, dir] = runs[next++];
      const pid_t pid = ::fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        CommandSpec child = spec;
        child.config_paths = {config};
        child.out_dir = dir;
        const int code = run_command(child, out, err);
        out.flush();
        err.flush();
        std::_Exit(code);
      }
      ++running;
    } else {
      reap();
    }
  }
  return status;
}

}  // namespace

int run_command(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  auto fail = [&](int code, const char* kind, const std::string& message) {
    err << "error kind=" << kind << " message=\"" << one_line(message) << "\"\n";
    err.flush();
    return code;
  };
  try {
    return dispatch(spec, out, err);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const Precondition& e) {
    return fail(kExitConfig, "precondition", e.what());
  } catch (const ReportExists& e) {
    return fail(kExitConfig, "precondition", e.what());
  } catch (const ContractError& e) {
    return fail(kExitConfig, "precondition", e.what());
  } catch (const FormatError& e) {
    return fail(kExitRuntime, "format", e.what());
  } catch (const TrainingDiverged& e) {
    return fail(kExitRuntime, "diverged", e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "runtime", e.what());
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"vaebench: amortized encoder vs variational lookup table workbench"};
  app.require_subcommand(1);
  CommandSpec spec;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", spec.config_paths, "key = value config file");
    sub->add_option("overrides", spec.overrides, "key=value overrides");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset or convert IDX files");
  with_config(gen);
  gen->add_option("--out", spec.out_dir, "dataset file to write")->required();

  for (const char* name : {"train", "evil-twin"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "train" ? "train an encoder or lookup table"
                                                                     : "train with the encoder fed fixed twins");
    with_config(sub);
    sub->add_option("--out", spec.out_dir, "report directory (parent directory with several configs)")->required();
    sub->add_flag("--force", spec.force, "replace an existing completed report");
    sub->add_option("--jobs", spec.jobs, "parallel processes for several configs")->check(CLI::PositiveNumber);
  }

  auto* probe = app.add_subcommand("probe", "augmentation probe on a trained encoder report");
  probe->add_option("--report", spec.report_dir, "trained report directory")->required();
  probe->add_option("--aug", spec.augmentation, "shift:K or rotate90[:TURNS]")->required();
  probe->add_option("--out", spec.out_dir, "probe output directory")->required();
  probe->add_flag("--force", spec.force, "replace an existing probe output");
  probe->add_option("overrides", spec.overrides, "key=value overrides (e.g. dataset=...)");

  auto* report = app.add_subcommand("report", "print a report's metrics or compare two reports");
  report->add_option("--report", spec.report_dir, "report directory")->required();
  report->add_option("--compare", spec.compare_dir, "second report to compare against");

  app.add_subcommand("selftest", "run the numerical oracle suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=usage message=\"" << one_line(e.what()) << "\"\n";
    return kExitConfig;
  }
  spec.subcommand = app.get_subcommands().front()->get_name();
  if (spec.config_paths.size() > 1 && spec.subcommand == "gen-data") {
    std::cerr << "error kind=usage message=\"gen-data takes one --config\"\n";
    return kExitConfig;
  }
  return run_command(spec, std::cout, std::cerr);
}

}  // namespace vaebench
