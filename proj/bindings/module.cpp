// Python bindings over the valuation core. Matrices and vectors cross the
// boundary as numpy arrays; valuations come back as plain dicts so callers
// can feed them straight into json.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "distval/harness.hpp"

namespace py = pybind11;
using namespace distval;

namespace {

py::dict valuation_dict(const Valuation& v) {
    py::dict out;
    out["source_ids"] = v.source_ids;
    out["prior"] = std::vector<double>(v.prior.data(), v.prior.data() + v.prior.size());
    out["scores"] = std::vector<double>(v.scores.data(), v.scores.data() + v.scores.size());
    out["tau"] = v.tau;
    out["posterior"] =
        std::vector<double>(v.posterior.data(), v.posterior.data() + v.posterior.size());
    return out;
}

FileFormat format_for(const std::string& path, const std::string& format) {
    if (!format.empty()) return parse_format(format);
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0
               ? FileFormat::csv
               : FileFormat::ddvm;
}

SourceCollection collect(const std::vector<std::pair<std::string, Dataset>>& sources) {
    return SourceCollection(sources);
}

}  // namespace

PYBIND11_MODULE(_distval, m) {
    m.doc() = "data distribution valuation core";

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<Matrix, Labels, int, bool>(), py::arg("features"), py::arg("labels"),
             py::arg("num_classes"), py::arg("labels_usable") = true)
        .def_property_readonly("features", &Dataset::features,
                               py::return_value_policy::copy)
        .def_property_readonly("labels", &Dataset::labels, py::return_value_policy::copy)
        .def_property_readonly("num_classes", &Dataset::num_classes)
        .def_property_readonly("dim", &Dataset::dim)
        .def_property_readonly("labels_usable", &Dataset::labels_usable)
        .def("__len__", [](const Dataset& d) { return static_cast<std::size_t>(d.size()); })
        .def("without_labels", &Dataset::without_labels)
        .def(
            "__eq__", [](const Dataset& a, const Dataset& b) { return a == b; },
            py::is_operator())
        .def_static(
            "load",
            [](const std::string& path, int num_classes) {
                return load_dataset(path, detect_format(path), num_classes);
            },
            py::arg("path"), py::arg("num_classes") = 0)
        .def(
            "save",
            [](const Dataset& d, const std::string& path, const std::string& format) {
                save_dataset(d, path, format_for(path, format));
            },
            py::arg("path"), py::arg("format") = "");

    py::class_<Model>(m, "Model")
        .def_property_readonly(
            "weights", [](const Model& model) { return model.weights; },
            py::return_value_policy::copy)
        .def_property_readonly(
            "bias", [](const Model& model) { return model.bias; },
            py::return_value_policy::copy)
        .def_property_readonly("dim", &Model::dim)
        .def_property_readonly("num_classes", &Model::num_classes)
        .def("predict_proba",
             [](const Model& model, const Matrix& x) { return predict_proba(model, x); })
        .def("extract_features",
             [](const Model& model, const Matrix& x) { return extract_features(model, x); })
        .def("accuracy",
             [](const Model& model, const Dataset& data) { return accuracy(model, data); })
        .def("save", [](const Model& model, const std::string& path) {
            save_model(model, path);
        })
        .def_static("load", [](const std::string& path) { return load_model(path); });

    m.def(
        "train",
        [](const Dataset& data, double learning_rate, int iterations, double l2,
           std::uint64_t seed) {
            return train(data, TrainConfig{learning_rate, iterations, l2, seed});
        },
        py::arg("data"), py::arg("learning_rate") = 0.1, py::arg("iterations") = 300,
        py::arg("l2") = 1e-4, py::arg("seed") = 0);

    m.def("quick_tau", &quick_tau, py::arg("source_count"));

    m.def(
        "gbv_posterior",
        [](const Vector& prior, const Vector& scores, double tau,
           std::vector<std::string> source_ids) {
            return valuation_dict(gbv_posterior(prior, scores, tau, std::move(source_ids)));
        },
        py::arg("prior"), py::arg("scores"), py::arg("tau"),
        py::arg("source_ids") = std::vector<std::string>{});

    m.def(
        "leep",
        [](const Matrix& probs, const Labels& labels, int num_classes) {
            return leep(probs, labels, num_classes).value;
        },
        py::arg("probs"), py::arg("labels"), py::arg("num_classes"));

    m.def(
        "logme",
        [](const Matrix& features, const Labels& labels, int num_classes) {
            return logme(features, labels, num_classes).value;
        },
        py::arg("features"), py::arg("labels"), py::arg("num_classes"));

    m.def(
        "etran_energy",
        [](const Matrix& features) { return etran_energy(features).value; },
        py::arg("features"));

    m.def(
        "neg_mmd",
        [](const Matrix& sample, const Matrix& reference, std::optional<double> bandwidth) {
            KernelSpec kernel;
            kernel.bandwidth = bandwidth;
            return neg_mmd(sample, reference, kernel).value;
        },
        py::arg("sample"), py::arg("reference"), py::arg("bandwidth") = std::nullopt);

    m.def("median_heuristic_bandwidth", &median_heuristic_bandwidth, py::arg("sample"),
          py::arg("reference"));

    m.def("pearson", &pearson, py::arg("x"), py::arg("y"));

    m.def(
        "annotator_valuation",
        [](const std::vector<std::pair<std::string, Dataset>>& sources,
           const Dataset& reference, const std::string& measure, const std::string& mode,
           std::optional<double> tau, double learning_rate, int iterations, double l2,
           std::uint64_t seed) {
            const SourceCollection collection = collect(sources);
            const ReferenceMode reference_mode = parse_reference_mode(mode);
            const Dataset resolved = build_reference(collection, reference, reference_mode);
            const Valuation valuation = annotator_valuation(
                collection, resolved, annotator_recipe(parse_measure(measure), reference_mode),
                uniform_prior(static_cast<Eigen::Index>(collection.size())), tau,
                TrainConfig{learning_rate, iterations, l2, seed});
            return valuation_dict(valuation);
        },
        py::arg("sources"), py::arg("reference"), py::arg("measure") = "leep",
        py::arg("mode") = "labeled", py::arg("tau") = std::nullopt,
        py::arg("learning_rate") = 0.1, py::arg("iterations") = 300, py::arg("l2") = 1e-4,
        py::arg("seed") = 0);

    m.def(
        "run_experiment_json",
        [](const std::string& scenario, std::uint64_t seed, const std::string& measure,
           const std::string& mode, std::optional<double> tau, bool search_tau,
           std::optional<int> classes, std::optional<int> dim, std::optional<int> per_class,
           std::optional<int> sources, std::optional<int> stream_steps) {
            ExperimentConfig config = default_config(parse_scenario(scenario), seed);
            if (!measure.empty()) config.measure = parse_measure(measure);
            if (!mode.empty()) config.reference_mode = parse_reference_mode(mode);
            if (tau) {
                config.tau = *tau;
                config.search_tau = false;
            }
            if (search_tau) config.search_tau = true;
            if (classes) config.synth.classes = *classes;
            if (dim) config.synth.dim = *dim;
            if (per_class) config.synth.per_class = *per_class;
            if (sources) config.synth.sources = *sources;
            if (stream_steps) config.stream_steps = *stream_steps;
            return report_to_json(run_experiment(config));
        },
        py::arg("scenario"), py::arg("seed") = 0, py::arg("measure") = "",
        py::arg("mode") = "", py::arg("tau") = std::nullopt, py::arg("search_tau") = false,
        py::arg("classes") = std::nullopt, py::arg("dim") = std::nullopt,
        py::arg("per_class") = std::nullopt, py::arg("sources") = std::nullopt,
        py::arg("stream_steps") = std::nullopt);
}
