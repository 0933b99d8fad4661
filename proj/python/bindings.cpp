#include "replayq/cli.hpp"
#include "replayq/compression.hpp"
#include "replayq/dpp_volume.hpp"
#include "replayq/error.hpp"
#include "replayq/exemplar_selection.hpp"
#include "replayq/feature_io.hpp"
#include "replayq/quality_selector.hpp"
#include "replayq/replay_harness.hpp"
#include "replayq/report_json.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;

namespace replayq::python {

namespace {

using FloatArray = py::array_t<float, py::array::f_style | py::array::forcecast>;

/// (dim, count) array + ids -> FeatureMatrix.
FeatureMatrix to_matrix(const FloatArray &values, std::vector<std::string> ids) {
  if (values.ndim() != 2) throw ValidationError("features must be a 2-D (dim, count) array");
  const auto dim = static_cast<std::size_t>(values.shape(0));
  const auto count = static_cast<std::size_t>(values.shape(1));
  if (ids.size() != count) throw ValidationError("ids length does not match the column count");
  std::vector<float> flat(values.data(), values.data() + dim * count);
  return FeatureMatrix(dim, std::move(flat), std::move(ids));
}

FloatArray to_array(const FeatureMatrix &m) {
  FloatArray out({m.dim(), m.count()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < n; ++j) ids.push_back(std::to_string(j));
  return ids;
}

py::object json_to_py(const nlohmann::json &j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

QualityCandidateSet candidate_set(std::vector<int> qualities, double epsilon) {
  QualityCandidateSet c;
  c.candidates = std::move(qualities);
  c.epsilon = epsilon;
  c.validate();
  return c;
}

} // namespace

void define_module(py::module_ &m) {
  m.doc() = "Volume-ratio quality selection for compressed replay buffers";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "read_feature_matrix",
      [](const std::filesystem::path &path) {
        auto fm = read_feature_matrix(path);
        return py::make_tuple(to_array(fm), fm.ids());
      },
      py::arg("path"), "Read an FMX1 file; returns (values[dim, count], ids).");
  m.def(
      "write_feature_matrix",
      [](const std::filesystem::path &path, const FloatArray &values, std::vector<std::string> ids) {
        write_feature_matrix(to_matrix(values, std::move(ids)), path);
      },
      py::arg("path"), py::arg("values"), py::arg("ids"));

  m.def(
      "class_mean", [](const FloatArray &values) {
        return class_mean(to_matrix(values, default_ids(static_cast<std::size_t>(values.shape(1)))));
      },
      py::arg("values"));
  m.def(
      "rank_by_mean_of_feature",
      [](const FloatArray &values, std::vector<std::string> ids) {
        auto r = rank_by_mean_of_feature(to_matrix(values, std::move(ids)));
        return py::make_tuple(r.ranked_ids, r.distances);
      },
      py::arg("values"), py::arg("ids"), "Returns (ranked_ids, distances), nearest to the class mean first.");

  m.def(
      "log_volume",
      [](const FloatArray &values) {
        const auto n = static_cast<std::size_t>(values.shape(1));
        return log_volume(normalize_columns(to_matrix(values, default_ids(n)))).value;
      },
      py::arg("values"), "0.5 * log det of the Gram matrix of the L2-normalized columns.");
  m.def(
      "volume_ratio",
      [](const FloatArray &compressed, const FloatArray &original) {
        const auto n = static_cast<std::size_t>(original.shape(1));
        return json_to_py(volume_ratio(to_matrix(compressed, default_ids(n)), to_matrix(original, default_ids(n))));
      },
      py::arg("compressed"), py::arg("original"));

  m.def(
      "pack_for_quality",
      [](const std::vector<std::uint64_t> &sizes, std::uint64_t budget_bytes) {
        const auto ids = default_ids(sizes.size());
        auto r = pack_for_quality(ids, 0, budget_bytes,
                                  [&](const std::string &id) { return sizes[std::stoul(id)]; });
        return py::make_tuple(r.n_q_mb, r.bytes_used);
      },
      py::arg("sizes"), py::arg("budget_bytes"), "Greedy prefix packing; returns (count, bytes_used).");

  m.def(
      "select_quality",
      [](const std::vector<std::tuple<int, std::size_t, double>> &rows, double epsilon) {
        std::vector<QualityReport> reports;
        std::vector<int> qualities;
        for (const auto &[q, n, ratio] : rows) {
          QualityReport r;
          r.quality = q;
          r.n_q_mb = n;
          r.ratio = ratio;
          reports.push_back(r);
          qualities.push_back(q);
        }
        std::sort(qualities.begin(), qualities.end());
        return json_to_py(select_quality(reports, candidate_set(qualities, epsilon)));
      },
      py::arg("rows"), py::arg("epsilon") = 0.5, "rows: (quality, n_q_mb, ratio) tuples.");

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init(&default_synthetic_config))
      .def_readwrite("dim", &SyntheticConfig::dim)
      .def_readwrite("classes_per_phase", &SyntheticConfig::classes_per_phase)
      .def_readwrite("phases", &SyntheticConfig::phases)
      .def_readwrite("samples_per_class", &SyntheticConfig::samples_per_class)
      .def_readwrite("cluster_spread", &SyntheticConfig::cluster_spread)
      .def_readwrite("within_class_sd", &SyntheticConfig::within_class_sd)
      .def_readwrite("noise_scale", &SyntheticConfig::noise_scale)
      .def_readwrite("noise_exponent", &SyntheticConfig::noise_exponent)
      .def_readwrite("seed", &SyntheticConfig::seed)
      .def_readwrite("test_fraction", &SyntheticConfig::test_fraction)
      .def_readwrite("payload_bytes", &SyntheticConfig::payload_bytes)
      .def_readwrite("budget_k", &SyntheticConfig::budget_k);

  m.def(
      "select_synthetic",
      [](const SyntheticConfig &config, std::vector<int> qualities, double epsilon) {
        const auto candidates = candidate_set(std::move(qualities), epsilon);
        const auto data = generate_synthetic(config, candidates.candidates);
        return json_to_py(select_for_benchmark(data.manifest, data.features, data.train_ids, candidates,
                                               synthetic_budget(data), synthetic_sizer(data)));
      },
      py::arg("config"), py::arg("qualities") = std::vector<int>{10, 25, 50, 75, 90}, py::arg("epsilon") = 0.5);

  m.def(
      "grid_search_synthetic",
      [](const SyntheticConfig &config, std::vector<int> qualities) {
        const auto data = generate_synthetic(config, qualities);
        const auto g = grid_search(data.manifest, data.features, data.train_ids, data.test_ids, qualities,
                                   synthetic_budget(data), synthetic_sizer(data));
        py::list rows;
        for (const auto &r : g.rows) {
          py::dict d;
          d["quality"] = r.quality;
          d["n_per_class"] = r.n_per_class;
          d["aic"] = r.aic;
          d["forgetting"] = r.forgetting;
          rows.append(d);
        }
        py::dict out;
        out["best_quality"] = g.best_quality;
        out["rows"] = rows;
        return out;
      },
      py::arg("config"), py::arg("qualities") = std::vector<int>{10, 25, 50, 75, 90});

  m.def(
      "simulate_synthetic",
      [](const SyntheticConfig &config, int quality, bool replay) {
        const std::vector<int> qs{quality};
        const auto data = generate_synthetic(config, qs);
        std::vector<ReplayBuffer> buffers;
        if (replay)
          buffers = plan_buffers(data.manifest, data.features, data.train_ids, quality, synthetic_budget(data),
                                 synthetic_sizer(data));
        const auto metrics = run_continual(data.manifest, data.features, data.train_ids, data.test_ids, buffers);
        py::dict out;
        out["aic"] = metrics.aic;
        out["averaged_forgetting"] = metrics.averaged_forgetting;
        out["per_phase_accuracy"] = metrics.per_phase_accuracy;
        return out;
      },
      py::arg("config"), py::arg("quality"), py::arg("replay") = true);

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a replayq subcommand in-process; returns (exit_code, stdout, stderr).");
}

PYBIND11_MODULE(_core, module) { // NOLINT
  define_module(module);
}

} // namespace replayq::python
