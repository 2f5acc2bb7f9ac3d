#include "distval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace distval {

double pearson(const Vector& x, const Vector& y) {
    const auto n = x.size();
    if (n < 2) throw std::invalid_argument("pearson needs at least 2 points");
    if (y.size() != n)
        throw std::invalid_argument(
            msg("pearson length mismatch: ", n, " vs ", y.size()));
    const Vector xc = x.array() - x.mean();
    const Vector yc = y.array() - y.mean();
    const double sx = xc.norm();
    const double sy = yc.norm();
    if (sx == 0.0 || sy == 0.0)
        throw std::invalid_argument("pearson is undefined for a constant vector");
    return std::clamp(xc.dot(yc) / (sx * sy), -1.0, 1.0);
}

TauSearch best_tau(const SourceCollection& sources, const Vector& scores, const Vector& prior,
                   const Dataset& selection_set, const TrainConfig& final_config) {
    if (!selection_set.labels_usable())
        throw std::invalid_argument("tau search needs a labeled selection set");
    TauSearch out;
    double best = -1.0;
    for (const double tau : kTauGrid) {
        const Valuation weights = gbv_posterior(prior, scores, tau, sources.ids());
        const Model model = train(sources, weights, final_config);
        const double acc = accuracy(model, selection_set);
        out.grid.push_back(tau);
        out.selection_accuracy.push_back(acc);
        // ties keep the larger tau: among equally good weightings prefer
        // the one closest to the prior
        if (acc >= best) {
            best = acc;
            out.tau = tau;
        }
    }
    return out;
}

Valuation mmd_softmax_baseline(const SourceCollection& sources, const Dataset& reference,
                               double temperature, const KernelSpec& kernel) {
    if (!(temperature > 0))
        throw std::invalid_argument(msg("temperature must be > 0, got ", temperature));
    const bool conditional = reference.labels_usable();
    const Measure measure = conditional ? Measure::cond_neg_mmd : Measure::neg_mmd;
    const Model unused{Matrix::Zero(sources.dim(), sources.num_classes()),
                       Vector::Zero(sources.num_classes())};
    TransferOptions options;
    options.kernel = kernel;
    Vector scores(static_cast<Eigen::Index>(sources.size()));
    for (std::size_t s = 0; s < sources.size(); ++s)
        scores(static_cast<Eigen::Index>(s)) =
            transfer_score(measure, unused, sources.dataset(s), reference, options);
    const Eigen::Index count = scores.size();
    return gbv_posterior(uniform_prior(count), std::move(scores), temperature, sources.ids());
}

Scenario parse_scenario(const std::string& name) {
    if (name == "annotator") return Scenario::annotator;
    if (name == "augmentation") return Scenario::augmentation;
    if (name == "continual") return Scenario::continual;
    if (name == "correlation") return Scenario::correlation;
    throw std::invalid_argument(msg("unknown scenario '", name, "'"));
}

std::string scenario_name(Scenario scenario) {
    switch (scenario) {
        case Scenario::annotator: return "annotator";
        case Scenario::augmentation: return "augmentation";
        case Scenario::continual: return "continual";
        case Scenario::correlation: return "correlation";
    }
    throw std::logic_error("unreachable");
}

ExperimentConfig default_config(Scenario scenario, std::uint64_t seed) {
    ExperimentConfig config;
    config.scenario = scenario;
    config.seed = seed;
    config.synth.seed = seed;
    switch (scenario) {
        case Scenario::annotator:
            break;  // leep, labeled reference, quick tau
        case Scenario::correlation:
            config.measure = Measure::logme;
            // wider class separation keeps the per-source accuracy spread in a
            // range where the posterior tracks it linearly
            config.synth.separation = 3.5;
            config.synth.per_class = 60;
            break;
        case Scenario::continual:
            // permuted noise leaves only small cumulative quality gaps between
            // sources, so the folded posterior needs a gentler temperature and
            // a fixture sized so weighting still moves the final model
            config.tau = 2.4;
            config.synth.per_class = 40;
            config.synth.test_per_class = 300;
            config.final_model.iterations = 150;
            break;
        case Scenario::augmentation:
            break;
    }
    return config;
}

std::vector<Augmentor> default_augmentors() {
    std::vector<Augmentor> out{Augmentor{}};  // identity
    for (const auto& a : discretize(AugmentOp::add_gaussian_noise, 2.0, 10.0, 5))
        out.push_back(a);
    for (const auto& a : discretize(AugmentOp::scale, 0.5, 1.5, 5)) out.push_back(a);
    for (const auto& a : discretize(AugmentOp::feature_dropout, 0.1, 0.5, 5)) out.push_back(a);
    return out;
}

namespace {

Vector to_vector(const std::vector<double>& values) {
    Vector out(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = values[i];
    return out;
}

Dataset concat_datasets(const std::vector<const Dataset*>& parts) {
    Eigen::Index total = 0;
    for (const auto* part : parts) total += part->size();
    Matrix features(total, parts.front()->dim());
    Labels labels;
    labels.reserve(static_cast<std::size_t>(total));
    Eigen::Index at = 0;
    for (const auto* part : parts) {
        features.middleRows(at, part->size()) = part->features();
        labels.insert(labels.end(), part->labels().begin(), part->labels().end());
        at += part->size();
    }
    return Dataset(std::move(features), std::move(labels), parts.front()->num_classes());
}

ExperimentReport annotator_like(const ExperimentConfig& config) {
    const AnnotatorFixture fixture = make_annotator_fixture(config.synth);
    const ValuationRecipe recipe = annotator_recipe(config.measure, config.reference_mode);
    const Dataset reference =
        build_reference(fixture.sources, fixture.reference, config.reference_mode);
    const auto scored =
        annotator_scores(fixture.sources, reference, recipe, config.source_model);

    const auto m = static_cast<Eigen::Index>(scored.size());
    Vector scores(m);
    for (Eigen::Index i = 0; i < m; ++i) scores(i) = scored[static_cast<std::size_t>(i)].score;
    const Vector prior = uniform_prior(m);

    ExperimentReport report;
    report.config = config;
    double tau;
    if (config.search_tau) {
        report.tau_search = best_tau(fixture.sources, scores, prior, reference,
                                     config.final_model);
        tau = report.tau_search->tau;
    } else {
        tau = resolve_tau(config.tau, m);
    }
    report.valuation = gbv_posterior(prior, scores, tau, fixture.sources.ids());

    for (const auto& entry : scored) {
        report.source_seconds.push_back(entry.seconds);
        if (entry.model)
            report.source_accuracy.push_back(accuracy(*entry.model, fixture.test));
    }

    const Model gbv_model = train(fixture.sources, report.valuation, config.final_model);
    const Model uniform_model =
        train(fixture.sources, uniform_valuation(fixture.sources.ids()), config.final_model);
    const Valuation baseline =
        mmd_softmax_baseline(fixture.sources, reference, config.baseline_temperature);
    const Model baseline_model = train(fixture.sources, baseline, config.final_model);
    report.final_accuracy["gbv"] = accuracy(gbv_model, fixture.test);
    report.final_accuracy["uniform"] = accuracy(uniform_model, fixture.test);
    report.final_accuracy["mmd_baseline"] = accuracy(baseline_model, fixture.test);

    if (report.source_accuracy.size() == scored.size()) {
        const Vector accs = to_vector(report.source_accuracy);
        report.correlation["gbv"] = pearson(report.valuation.posterior, accs);
        report.correlation["mmd_baseline"] = pearson(baseline.posterior, accs);
    }
    return report;
}

ExperimentReport continual_scenario(const ExperimentConfig& config) {
    if (config.search_tau)
        throw std::invalid_argument("tau search is not available for the continual scenario");
    const AnnotatorFixture fixture = make_annotator_fixture(config.synth);
    const auto m = fixture.clean_sources.size();
    NoiseSpec noise = linear_noise(static_cast<int>(m), mix_seed(config.seed, 201));
    std::vector<StreamStep> steps =
        split_stream(fixture.clean_sources, config.stream_steps, noise,
                     mix_seed(config.seed, 202));
    // the valuation path consumes the feed; this copy is the cumulative
    // training path, the only place allowed to merge past steps
    const std::vector<StreamStep> kept = steps;

    const ValuationRecipe recipe = annotator_recipe(config.measure, config.reference_mode);
    const Dataset reference =
        build_reference(fixture.sources, fixture.reference, config.reference_mode);
    VectorStreamFeed feed(std::move(steps));
    PosteriorTrajectory trajectory =
        run_stream(feed, reference, recipe, uniform_prior(static_cast<Eigen::Index>(m)),
                   config.tau, config.source_model);

    ExperimentReport report;
    report.config = config;
    report.valuation = trajectory.posteriors.back();

    const auto ids = fixture.clean_sources.ids();
    for (int t = 1; t <= trajectory.steps(); ++t) {
        std::vector<std::pair<std::string, Dataset>> merged;
        merged.reserve(m);
        for (std::size_t s = 0; s < m; ++s) {
            std::vector<const Dataset*> parts;
            for (int u = 0; u < t; ++u)
                parts.push_back(&kept[static_cast<std::size_t>(u)].per_source[s].second);
            merged.emplace_back(ids[s], concat_datasets(parts));
        }
        const SourceCollection merged_sources(std::move(merged));
        const auto evaluate = [&](const Valuation& weights) {
            return accuracy(train(merged_sources, weights, config.final_model), fixture.test);
        };
        report.step_accuracy["cgbv"].push_back(evaluate(trajectory.at(t)));
        report.step_accuracy["no_update"].push_back(evaluate(baseline_no_update(trajectory)));
        report.step_accuracy["average"].push_back(evaluate(baseline_average(trajectory, t)));
    }
    for (const auto& [method, accs] : report.step_accuracy)
        report.final_accuracy[method] = accs.back();
    report.trajectory = std::move(trajectory);
    return report;
}

ExperimentReport augmentation_scenario(const ExperimentConfig& config) {
    SynthParams params = config.synth;
    params.sources = 1;  // one clean training pool
    const AnnotatorFixture fixture = make_annotator_fixture(params);
    const Dataset& train_set = fixture.clean_sources.dataset(0);
    const Model universal = train(train_set, config.source_model);
    const std::vector<Augmentor> augmentors =
        config.augmentors.empty() ? default_augmentors() : config.augmentors;
    const auto count = static_cast<Eigen::Index>(augmentors.size());
    const Vector prior = uniform_prior(count);

    ExperimentReport report;
    report.config = config;
    report.config.augmentors = augmentors;  // echo the resolved set

    Valuation valuation =
        augmentation_valuation(train_set, augmentors, universal, config.measure, prior,
                               config.tau, mix_seed(config.seed, 301));
    if (config.search_tau) {
        TauSearch search;
        double best = -1.0;
        for (const double tau : kTauGrid) {
            const Valuation weights =
                gbv_posterior(prior, valuation.scores, tau, valuation.source_ids);
            const Model model = train_augmented(train_set, augmentors, weights,
                                                config.final_model, config.sampling);
            const double acc = accuracy(model, fixture.reference);
            search.grid.push_back(tau);
            search.selection_accuracy.push_back(acc);
            if (acc > best) {
                best = acc;
                search.tau = tau;
            }
        }
        valuation = gbv_posterior(prior, valuation.scores, search.tau, valuation.source_ids);
        report.tau_search = search;
    }
    report.valuation = valuation;

    const Model gbv_model = train_augmented(train_set, augmentors, valuation,
                                            config.final_model, config.sampling);
    const Model uniform_model =
        train_augmented(train_set, augmentors, uniform_valuation(valuation.source_ids),
                        config.final_model, config.sampling);
    report.final_accuracy["gbv"] = accuracy(gbv_model, fixture.test);
    report.final_accuracy["uniform"] = accuracy(uniform_model, fixture.test);
    return report;
}

using nlohmann::json;

json to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

std::string reference_mode_name(ReferenceMode mode) {
    switch (mode) {
        case ReferenceMode::labeled: return "labeled";
        case ReferenceMode::unlabeled_energy: return "unlabeled_energy";
        case ReferenceMode::union_of_sources: return "union_of_sources";
    }
    throw std::logic_error("unreachable");
}

json to_json(const TrainConfig& config) {
    return {{"learning_rate", config.learning_rate},
            {"iterations", config.iterations},
            {"l2", config.l2},
            {"seed", config.seed}};
}

json to_json(const SynthParams& params) {
    return {{"classes", params.classes},
            {"dim", params.dim},
            {"per_class", params.per_class},
            {"sources", params.sources},
            {"ref_per_class", params.ref_per_class},
            {"test_per_class", params.test_per_class},
            {"separation", params.separation},
            {"seed", params.seed}};
}

json to_json(const ExperimentConfig& config) {
    json out{{"scenario", scenario_name(config.scenario)},
             {"seed", config.seed},
             {"synth", to_json(config.synth)},
             {"measure", measure_name(config.measure)},
             {"reference_mode", reference_mode_name(config.reference_mode)},
             {"tau", config.tau ? json(*config.tau) : json(nullptr)},
             {"search_tau", config.search_tau},
             {"source_model", to_json(config.source_model)},
             {"final_model", to_json(config.final_model)},
             {"stream_steps", config.stream_steps},
             {"baseline_temperature", config.baseline_temperature},
             {"sampling",
              config.sampling == AugmentSampling::per_batch ? "per_batch" : "per_image"}};
    if (config.scenario == Scenario::augmentation) {
        json names = json::array();
        for (const auto& a : config.augmentors) names.push_back(a.name());
        out["augmentors"] = names;
    }
    return out;
}

json to_json(const Valuation& valuation) {
    return {{"source_ids", valuation.source_ids},
            {"prior", to_json(valuation.prior)},
            {"scores", to_json(valuation.scores)},
            {"tau", valuation.tau},
            {"posterior", to_json(valuation.posterior)}};
}

json report_json(const ExperimentReport& report) {
    json out{{"schema_version", ExperimentReport::schema_version},
             {"config", to_json(report.config)},
             {"valuation", to_json(report.valuation)},
             {"per_source_accuracy", report.source_accuracy},
             {"final_accuracy", report.final_accuracy},
             {"correlation", report.correlation}};
    if (!report.step_accuracy.empty()) out["step_accuracy"] = report.step_accuracy;
    if (report.trajectory) {
        json posteriors = json::array();
        for (const auto& v : report.trajectory->posteriors) posteriors.push_back(to_json(v));
        out["trajectory"] = posteriors;
    }
    if (report.tau_search)
        out["tau_search"] = {{"tau", report.tau_search->tau},
                             {"grid", report.tau_search->grid},
                             {"selection_accuracy", report.tau_search->selection_accuracy}};
    const TimingSummary timing = timing_report(report);
    out["timings"] = {{"per_source_seconds", timing.per_source},
                      {"mean_seconds", timing.mean},
                      {"stderr_seconds", timing.standard_error}};
    return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    try {
        switch (config.scenario) {
            case Scenario::annotator:
            case Scenario::correlation:
                return annotator_like(config);
            case Scenario::continual:
                return continual_scenario(config);
            case Scenario::augmentation:
                return augmentation_scenario(config);
        }
        throw std::logic_error("unreachable");
    } catch (const std::exception& error) {
        throw std::runtime_error(
            msg(scenario_name(config.scenario), " scenario failed: ", error.what()));
    }
}

TimingSummary timing_report(const ExperimentReport& report) {
    TimingSummary out;
    out.per_source = report.source_seconds;
    const auto n = out.per_source.size();
    if (n == 0) return out;
    double sum = 0.0;
    for (const double v : out.per_source) sum += v;
    out.mean = sum / static_cast<double>(n);
    if (n >= 2) {
        double sq = 0.0;
        for (const double v : out.per_source) sq += (v - out.mean) * (v - out.mean);
        out.standard_error =
            std::sqrt(sq / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    }
    return out;
}

std::string report_to_json(const ExperimentReport& report, int indent) {
    return report_json(report).dump(indent);
}

std::string report_payload(const ExperimentReport& report) {
    json out = report_json(report);
    out.erase("timings");
    return out.dump();
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(msg("cannot open '", path.string(), "' for writing"));
    out << report_to_json(report) << '\n';
    if (!out) throw std::runtime_error(msg("failed writing '", path.string(), "'"));
}

std::string valuation_to_json(const Valuation& valuation, int indent) {
    return to_json(valuation).dump(indent);
}

std::string trajectory_to_json(const PosteriorTrajectory& trajectory, int indent) {
    json posteriors = json::array();
    for (const auto& v : trajectory.posteriors) posteriors.push_back(to_json(v));
    return json{{"steps", trajectory.steps()}, {"posteriors", posteriors}}.dump(indent);
}

}  // namespace distval
