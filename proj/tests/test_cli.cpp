#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "vaebench/binary_io.hpp"
#include "vaebench/cli.hpp"
#include "vaebench/report.hpp"

using namespace vaebench;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() / ("vaebench_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

struct Outcome {
  int status;
  std::string out, err;
};

Outcome run(const CommandSpec& spec) {
  std::ostringstream out, err;
  const int status = run_command(spec, out, err);
  return {status, out.str(), err.str()};
}

CommandSpec gen(const std::string& out) {
  CommandSpec s;
  s.subcommand = "gen-data";
  s.out_dir = out;
  s.overrides = {"n=40", "image_size=16", "grid=16", "snr=1", "seed=3"};
  return s;
}

CommandSpec train_spec(const std::string& data, const std::string& out, std::vector<std::string> extra = {}) {
  CommandSpec s;
  s.subcommand = "train";
  s.out_dir = out;
  s.overrides = {"dataset=" + data, "z_dim=2", "epochs=1", "batch_size=16", "encoder_preset=small",
                 "decoder_preset=small", "volume_dumps=1", "image_dumps=1"};
  s.overrides.insert(s.overrides.end(), extra.begin(), extra.end());
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

TEST_CASE("gen-data is byte reproducible") {
  Scratch dir;
  CHECK(run(gen(dir / "a.vbds")).status == kExitOk);
  CHECK(run(gen(dir / "b.vbds")).status == kExitOk);
  CHECK(read_file_bytes(dir / "a.vbds") == read_file_bytes(dir / "b.vbds"));

  CommandSpec bad = gen(dir / "c.vbds");
  bad.overrides.push_back("grid=15");
  const Outcome o = run(bad);
  CHECK(o.status == kExitConfig);
  CHECK(o.err.rfind("error kind=config", 0) == 0);
}

TEST_CASE("train, report and re-run from the echoed config") {
  Scratch dir;
  REQUIRE(run(gen(dir / "d.vbds")).status == kExitOk);

  const Outcome zero = run(train_spec(dir / "d.vbds", dir / "zero", {"epochs=0"}));
  CHECK(zero.status == kExitOk);
  CHECK(report_complete(dir / "zero"));

  const Outcome first = run(train_spec(dir / "d.vbds", dir / "first"));
  REQUIRE(first.status == kExitOk);
  CHECK(first.err.find("epoch 1/1") != std::string::npos);
  for (const char* f : {"config.txt", "losses.csv", "latents.csv", "latent_table.csv", "reference_points.csv",
                        "metrics.csv", "timing.csv", "model.ckpt", "latents.ckpt", "volumes/volume_0.f32",
                        "volumes/volume_0.txt", "images/observed_0.pgm", "images/recon_0.pgm"}) {
    CHECK_MESSAGE(fs::exists(fs::path(dir / "first") / f), f);
  }

  // Completed reports are not overwritten without --force.
  const Outcome again = run(train_spec(dir / "d.vbds", dir / "first"));
  CHECK(again.status == kExitConfig);
  CHECK(again.err.find("--force") != std::string::npos);
  CommandSpec forced = train_spec(dir / "d.vbds", dir / "first");
  forced.force = true;
  CHECK(run(forced).status == kExitOk);

  CommandSpec echo;
  echo.subcommand = "train";
  echo.config_paths = {(fs::path(dir / "first") / "config.txt").string()};
  echo.out_dir = dir / "echo";
  REQUIRE(run(echo).status == kExitOk);
  CommandSpec cmp;
  cmp.subcommand = "report";
  cmp.report_dir = dir / "first";
  cmp.compare_dir = dir / "echo";
  const Outcome same = run(cmp);
  CHECK_MESSAGE(same.status == kExitOk, same.out);
  CHECK(same.out.find("reports identical") != std::string::npos);

  cmp.compare_dir = dir / "zero";
  const Outcome differ = run(cmp);
  CHECK(differ.status == kExitRuntime);
  CHECK(differ.out.find("differs losses.csv") != std::string::npos);

  CommandSpec show;
  show.subcommand = "report";
  show.report_dir = dir / "first";
  CHECK(run(show).out.find("knn5_accuracy") != std::string::npos);
}

TEST_CASE("configuration and precondition errors") {
  Scratch dir;
  REQUIRE(run(gen(dir / "d.vbds")).status == kExitOk);

  const Outcome unknown = run(train_spec(dir / "d.vbds", dir / "r", {"epoch=3"}));
  CHECK(unknown.status == kExitConfig);
  CHECK(unknown.err.find("epoch") != std::string::npos);
  CHECK(std::count(unknown.err.begin(), unknown.err.end(), '\n') == 1);

  CHECK(run(train_spec(dir / "missing.vbds", dir / "r")).status == kExitConfig);
  CHECK(run(train_spec(dir / "d.vbds", dir / "r", {"backend=vlt", "twin_mode=noise"})).status == kExitConfig);

  write_text(dir / "garbage.vbds", "not a dataset");
  const Outcome garbage = run(train_spec(dir / "garbage.vbds", dir / "r"));
  CHECK(garbage.status == kExitRuntime);
  CHECK(garbage.err.rfind("error kind=format", 0) == 0);

  REQUIRE(run(train_spec(dir / "d.vbds", dir / "table", {"backend=vlt"})).status == kExitOk);
  CommandSpec probe;
  probe.subcommand = "probe";
  probe.report_dir = dir / "table";
  probe.augmentation = "shift:1";
  probe.out_dir = dir / "probe";
  const Outcome p = run(probe);
  CHECK(p.status == kExitConfig);
  CHECK(p.err.rfind("error kind=precondition", 0) == 0);
  CHECK(p.err.find("backend=encoder") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "probe"));
}

TEST_CASE("probe writes its tables") {
  Scratch dir;
  REQUIRE(run(gen(dir / "d.vbds")).status == kExitOk);
  REQUIRE(run(train_spec(dir / "d.vbds", dir / "enc")).status == kExitOk);
  CommandSpec probe;
  probe.subcommand = "probe";
  probe.report_dir = dir / "enc";
  probe.augmentation = "rotate90";
  probe.out_dir = dir / "probe";
  const Outcome p = run(probe);
  REQUIRE(p.status == kExitOk);
  CHECK(fs::exists(fs::path(dir / "probe") / "probe.csv"));
  CHECK(fs::exists(fs::path(dir / "probe") / "probe_summary.csv"));
  CHECK(run(probe).status == kExitConfig);
  probe.augmentation = "shift:16";
  probe.force = true;
  CHECK(run(probe).status == kExitConfig);
}

TEST_CASE("several configs run as separate jobs") {
  Scratch dir;
  REQUIRE(run(gen(dir / "d.vbds")).status == kExitOk);
  const std::string base = "dataset = " + (dir / "d.vbds") +
                           "\nz_dim = 2\nepochs = 1\nbatch_size = 16\nencoder_preset = small\n"
                           "decoder_preset = small\nvolume_dumps = 0\nimage_dumps = 0\n";
  write_text(dir / "enc.cfg", base);
  write_text(dir / "vlt.cfg", base + "backend = vlt\n");
  CommandSpec s;
  s.subcommand = "train";
  s.config_paths = {dir / "enc.cfg", dir / "vlt.cfg"};
  s.out_dir = dir / "runs";
  s.jobs = 2;
  CHECK(run(s).status == kExitOk);
  CHECK(report_complete((fs::path(dir / "runs") / "enc").string()));
  CHECK(report_complete((fs::path(dir / "runs") / "vlt").string()));
  CHECK(load_report_config((fs::path(dir / "runs") / "vlt").string()).backend == BackendKind::vlt);
}
