#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vaebench/cli.hpp"
#include "vaebench/dataset.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/experiments.hpp"
#include "vaebench/forward_model.hpp"
#include "vaebench/inference.hpp"
#include "vaebench/report.hpp"
#include "vaebench/selftest.hpp"

namespace py = pybind11;
using namespace vaebench;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> values, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  return to_array(t.data(), shape);
}

std::vector<double> from_array(const Array& a, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(a.size()) != expected) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                         std::to_string(a.size()));
  }
  return {a.data(), a.data() + a.size()};
}

Volume volume_from(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2)) {
    throw DimensionError("volume must be a cubic 3-d array");
  }
  Volume v(static_cast<std::size_t>(a.shape(0)));
  v.voxels = from_array(a, v.voxels.size(), "volume");
  return v;
}

Image image_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw DimensionError("image must be a square 2-d array");
  Image img(static_cast<std::size_t>(a.shape(0)));
  img.pixels = from_array(a, img.pixels.size(), "image");
  return img;
}

Array volume_array(const Volume& v) {
  const auto l = static_cast<py::ssize_t>(v.size);
  return to_array(v.voxels, {l, l, l});
}

Array image_array(const Image& img) {
  const auto d = static_cast<py::ssize_t>(img.size);
  return to_array(img.pixels, {d, d});
}

KeyValues key_values(const py::dict& d) {
  KeyValues kv;
  for (const auto& [k, v] : d) {
    std::string value = py::isinstance<py::bool_>(v) ? (v.cast<bool>() ? "true" : "false") : py::str(v).cast<std::string>();
    kv.set(py::str(k).cast<std::string>(), value);
  }
  return kv;
}

py::dict to_dict(const KeyValues& kv) {
  py::dict d;
  for (const auto& [k, v] : kv.entries()) d[py::str(k)] = v;
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  py::list epochs;
  for (const auto& e : r.epochs) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["neg_elbo"] = e.neg_elbo;
    row["recon"] = e.recon;
    row["kl"] = e.kl;
    row["seconds"] = e.seconds;
    epochs.append(row);
  }
  d["config"] = to_dict(r.config.to_key_values());
  d["epochs"] = epochs;
  d["latents"] = to_array(r.latents);
  d["truth"] = r.truth;
  d["mean_epoch_seconds"] = r.mean_epoch_seconds;
  if (r.clusters) {
    d["knn5_accuracy"] = r.clusters->knn_accuracy;
    d["centroid_separation_ratio"] = r.clusters->centroid_separation_ratio;
  }
  if (r.pca) {
    d["pca"] = to_array(r.pca->coords);
    d["pca_explained"] = r.pca->explained;
  }
  py::list volumes;
  for (const auto& v : r.volumes) volumes.append(volume_array(v));
  d["volumes"] = volumes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_vaebench, m) {
  m.doc() = "VAE workbench: synthetic tomographic data, encoder and lookup-table inference, probes.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", &Dataset::size)
      .def_readonly("image_size", &Dataset::image_size)
      .def_readonly("snr", &Dataset::snr)
      .def_readonly("seed", &Dataset::seed)
      .def_property_readonly("mode", [](const Dataset& d) {
        return d.mode == DatasetMode::tomographic ? "tomographic" : "pixel_image";
      })
      .def_property_readonly("images", [](const Dataset& d) { return to_array(image_matrix(d)).reshape(
                                            {static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.image_size),
                                             static_cast<py::ssize_t>(d.image_size)}); })
      .def_property_readonly("truth", [](const Dataset& d) {
        std::vector<double> t;
        for (const auto& img : d.images) t.push_back(img.truth);
        return t;
      })
      .def("labels", &Dataset::labels)
      .def("__len__", &Dataset::size);

  m.def(
      "generate_dataset",
      [](const py::dict& options) { return generate_dataset(generation_from_key_values(key_values(options))); },
      py::arg("options") = py::dict(),
      "Synthetic particle images. Keys as for gen-data: n, image_size, grid, snr, conformation_law, seed, ...");
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("data"));
  m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));

  m.def(
      "make_phantom",
      [](double conformation, std::size_t size) { return volume_array(make_phantom(conformation, size)); },
      py::arg("conformation"), py::arg("size"));
  m.def(
      "rotate",
      [](const Array& volume, std::array<double, 4> q) {
        return volume_array(rotate_volume(volume_from(volume), Quaternion{q[0], q[1], q[2], q[3]}));
      },
      py::arg("volume"), py::arg("quaternion"), "Trilinear rotation by a unit quaternion (w, x, y, z).");
  m.def(
      "project", [](const Array& volume) { return image_array(project(volume_from(volume))); }, py::arg("volume"),
      "Sum along the last axis.");
  m.def(
      "translate",
      [](const Array& image, std::array<double, 2> shift) { return image_array(translate_image(image_from(image), shift)); },
      py::arg("image"), py::arg("shift"));
  m.def(
      "apply_ctf",
      [](const Array& image, std::size_t kernel_id) { return image_array(apply_ctf(image_from(image), kernel_id)); },
      py::arg("image"), py::arg("kernel_id"));

  m.def(
      "kl_standard_normal",
      [](std::vector<double> mu, std::vector<double> log_sigma) {
        return kl_standard_normal(LatentDistribution{std::move(mu), std::move(log_sigma)});
      },
      py::arg("mu"), py::arg("log_sigma"), "KL(N(mu, diag sigma^2) || N(0, I)).");

  m.def(
      "train",
      [](const py::dict& config, const Dataset& data) {
        const ExperimentConfig cfg = ExperimentConfig::from_key_values(key_values(config));
        RunResult run = [&] {
          py::gil_scoped_release release;
          return cfg.twin_mode == TwinMode::none ? train(cfg, data) : evil_twin_train(cfg, data);
        }();
        return report_dict(run.report);
      },
      py::arg("config"), py::arg("data"), "Trains per the config keys and returns the run summary as a dict.");

  m.def(
      "augment_probe",
      [](const std::string& report_dir, const Dataset& data, const std::string& augmentation) {
        const Model model = load_report_model(report_dir, data);
        const AugmentReport r = augment_probe(model, data, Augmentation::parse(augmentation));
        py::dict d;
        d["displacement"] = r.displacement;
        d["ratio"] = r.ratio;
        d["reference_scale"] = r.reference_scale;
        d["mean_ratio"] = r.mean_ratio;
        d["accuracy_original"] = r.accuracy_original;
        d["accuracy_augmented"] = r.accuracy_augmented;
        return d;
      },
      py::arg("report_dir"), py::arg("data"), py::arg("augmentation"));

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> storage{"vaebench"};
        storage.insert(storage.end(), args.begin(), args.end());
        std::vector<char*> argv;
        for (auto& s : storage) argv.push_back(s.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit status.");

  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (auto group : {adjoint_checks(16), kl_checks(200'000), reparameterization_checks()})
      for (const auto& r : group) out.emplace_back(r.name, r.passed, r.detail);
    return out;
  }, "Quick oracle checks: adjoints, KL and reparameterization.");
}
