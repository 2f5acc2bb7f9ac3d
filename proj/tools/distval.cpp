// Command line front end over the valuation library. One subcommand per
// workflow stage: data conversion, training, scoring, valuation, streaming,
// augmentation, synthetic fixtures, experiments, and correlation checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distval/harness.hpp"

using namespace distval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Thrown when --assert thresholds fail; mapped to exit code 2.
struct AssertFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TauPolicy {
    enum class Kind { quick, best, fixed };
    Kind kind = Kind::quick;
    double value = 0.0;
};

TauPolicy parse_tau_policy(const std::string& text) {
    TauPolicy policy;
    if (text == "quick") {
        policy.kind = TauPolicy::Kind::quick;
        return policy;
    }
    if (text == "best") {
        policy.kind = TauPolicy::Kind::best;
        return policy;
    }
    std::size_t used = 0;
    try {
        policy.value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument(msg("tau must be 'quick', 'best', or a number, got '",
                                        text, "'"));
    }
    if (used != text.size() || !(policy.value > 0))
        throw std::invalid_argument(msg("tau must be 'quick', 'best', or a positive number, "
                                        "got '", text, "'"));
    policy.kind = TauPolicy::Kind::fixed;
    return policy;
}

Dataset load_any(const fs::path& path, int num_classes = 0) {
    return load_dataset(path, detect_format(path), num_classes);
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(msg("cannot open '", out_path, "' for writing"));
    out << text << '\n';
    if (!out) throw std::runtime_error(msg("failed writing '", out_path, "'"));
}

json vector_to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Valuation json_to_valuation(const json& value) {
    Valuation v;
    v.source_ids = value.at("source_ids").get<std::vector<std::string>>();
    const auto prior = value.at("prior").get<std::vector<double>>();
    const auto scores = value.at("scores").get<std::vector<double>>();
    const auto posterior = value.at("posterior").get<std::vector<double>>();
    v.tau = value.at("tau").get<double>();
    const auto to_vec = [](const std::vector<double>& in) {
        Vector out(static_cast<Eigen::Index>(in.size()));
        for (std::size_t i = 0; i < in.size(); ++i) out(static_cast<Eigen::Index>(i)) = in[i];
        return out;
    };
    v.prior = to_vec(prior);
    v.scores = to_vec(scores);
    v.posterior = to_vec(posterior);
    validate(v);
    return v;
}

Valuation load_valuation(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(msg("cannot open '", path.string(), "' for reading"));
    json value;
    in >> value;
    if (value.contains("valuation")) return json_to_valuation(value.at("valuation"));
    return json_to_valuation(value);
}

Vector load_prior(const std::string& spec, Eigen::Index count) {
    if (spec == "uniform") return uniform_prior(count);
    std::ifstream in(spec);
    if (!in) throw std::runtime_error(msg("cannot open prior file '", spec, "' for reading"));
    json value;
    in >> value;
    const auto entries = value.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(entries.size()) != count)
        throw std::invalid_argument(msg("prior file covers ", entries.size(),
                                        " sources, expected ", count));
    Vector prior(count);
    for (std::size_t i = 0; i < entries.size(); ++i)
        prior(static_cast<Eigen::Index>(i)) = entries[i];
    return prior;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    std::vector<std::uint64_t> seeds;
    if (dots == std::string::npos) {
        seeds.push_back(std::stoull(text));
        return seeds;
    }
    const auto lo = std::stoull(text.substr(0, dots));
    const auto hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument(msg("empty seed range '", text, "'"));
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
}

fs::path seeded_path(const fs::path& base, std::uint64_t seed, bool multi) {
    if (!multi) return base;
    fs::path out = base;
    const std::string stem = out.stem().string();
    const std::string ext = out.extension().string();
    out.replace_filename(stem + "_seed" + std::to_string(seed) + ext);
    return out;
}

// ---- subcommand state ----

struct ConvertArgs {
    std::string in, out, format;
    int classes = 0;
};

struct TrainArgs {
    std::string sources, data, out, valuation;
    TrainConfig config{};
};

struct ScoreArgs {
    std::string measure = "leep";
    std::string model, data, target;
    int classes = 0;
    double bandwidth = 0.0;
    bool probe_features = false;
};

struct ValueArgs {
    std::string sources, reference, out;
    std::string measure = "leep";
    std::string mode = "labeled";
    std::string tau = "quick";
    std::string prior = "uniform";
    TrainConfig config{};
};

struct ContinualArgs {
    std::string stream, reference, out;
    std::string measure = "leep";
    std::string mode = "labeled";
    std::string tau = "quick";
    TrainConfig config{};
};

struct AugmentArgs {
    std::string train_path, augmentors, universal, out, fit_out;
    std::string measure = "leep";
    std::string tau = "quick";
    std::string sampling = "per_batch";
    std::uint64_t seed = 0;
    TrainConfig config{};
};

struct SynthArgs {
    SynthParams params{};
    std::string noise = "linear";
    std::string out;
    int stream_steps = 0;
};

struct ExperimentArgs {
    std::string scenario;
    std::string seeds = "0";
    std::string out;
    std::string measure, mode, tau;
    bool search_tau = false;
    int stream_steps = 0;
    bool enforce = false;
};

struct CorrelateArgs {
    std::string sources, reference, test, out;
    std::string measure = "logme";
    std::string mode = "labeled";
    std::string tau = "best";
    double min_r = 0.85;
    bool enforce = false;
    TrainConfig config{};
};

void add_train_flags(CLI::App* cmd, TrainConfig& config,
                     const std::string& seed_flag = "--seed") {
    cmd->add_option("--lr", config.learning_rate, "gradient descent learning rate");
    cmd->add_option("--iterations", config.iterations, "gradient descent iterations");
    cmd->add_option("--l2", config.l2, "l2 regularization strength");
    cmd->add_option(seed_flag, config.seed, "training seed");
}

// ---- subcommand bodies ----

void run_convert(const ConvertArgs& args) {
    const Dataset dataset = load_any(args.in, args.classes);
    save_dataset(dataset, args.out, parse_format(args.format));
    std::printf("wrote %s (%lld rows, dim %d, %d classes)\n", args.out.c_str(),
                static_cast<long long>(dataset.size()), dataset.dim(), dataset.num_classes());
}

void run_train(const TrainArgs& args) {
    if (args.sources.empty() == args.data.empty())
        throw std::invalid_argument("pass exactly one of --sources or --data");
    Model model;
    if (!args.sources.empty()) {
        const SourceCollection sources = load_source_dir(args.sources);
        std::optional<Valuation> weights;
        if (!args.valuation.empty()) weights = load_valuation(args.valuation);
        model = train(sources, weights, args.config);
    } else {
        if (!args.valuation.empty())
            throw std::invalid_argument("--valuation needs --sources, not --data");
        model = train(load_any(args.data), args.config);
    }
    save_model(model, args.out);
    std::printf("wrote %s\n", args.out.c_str());
}

void run_score(const ScoreArgs& args) {
    const Measure measure = parse_measure(args.measure);
    const Dataset data = load_any(args.data, args.classes);
    const Dataset target = load_any(args.target, args.classes);

    const bool raw_mmd = (measure == Measure::neg_mmd || measure == Measure::cond_neg_mmd) &&
                         !args.probe_features;
    Model model;
    if (!args.model.empty()) {
        model = load_model(args.model);
    } else if (!raw_mmd) {
        throw std::invalid_argument(
            msg("--model is required for measure '", args.measure, "'"));
    } else {
        model = Model{Matrix::Zero(data.dim(), data.num_classes()),
                      Vector::Zero(data.num_classes())};
    }

    TransferOptions options;
    if (args.bandwidth != 0.0) options.kernel.bandwidth = args.bandwidth;
    options.mmd_on_probe_features = args.probe_features;
    if (args.probe_features) options.probe = &model;

    const double value = transfer_score(measure, model, data, target, options);
    std::cout << json{{"measure", measure_name(measure)}, {"value", value}}.dump(2) << '\n';
}

struct ValuationRun {
    Valuation valuation;
    std::optional<TauSearch> search;
    std::vector<SourceScore> scored;
};

ValuationRun value_sources(const SourceCollection& sources, const Dataset& reference,
                           Measure measure, ReferenceMode mode, const TauPolicy& tau,
                           const Vector& prior, const TrainConfig& config) {
    ValuationRun run;
    run.scored = annotator_scores(sources, reference, annotator_recipe(measure, mode), config);
    Vector scores(static_cast<Eigen::Index>(run.scored.size()));
    for (std::size_t i = 0; i < run.scored.size(); ++i)
        scores(static_cast<Eigen::Index>(i)) = run.scored[i].score;

    double resolved;
    switch (tau.kind) {
        case TauPolicy::Kind::quick:
            resolved = resolve_tau(std::nullopt, scores.size());
            break;
        case TauPolicy::Kind::fixed:
            resolved = tau.value;
            break;
        case TauPolicy::Kind::best:
            run.search = best_tau(sources, scores, prior, reference, config);
            resolved = run.search->tau;
            break;
    }
    run.valuation = gbv_posterior(prior, std::move(scores), resolved, sources.ids());
    return run;
}

json valuation_json(const ValuationRun& run) {
    json out = json::parse(valuation_to_json(run.valuation));
    if (run.search)
        out["tau_search"] = {{"tau", run.search->tau},
                             {"grid", run.search->grid},
                             {"selection_accuracy", run.search->selection_accuracy}};
    json seconds = json::array();
    for (const auto& entry : run.scored) seconds.push_back(entry.seconds);
    out["per_source_seconds"] = seconds;
    return out;
}

void run_value(const ValueArgs& args) {
    const SourceCollection sources = load_source_dir(args.sources);
    const ReferenceMode mode = parse_reference_mode(args.mode);
    std::optional<Dataset> reference_file;
    if (!args.reference.empty()) reference_file = load_any(args.reference);
    if (mode != ReferenceMode::union_of_sources && !reference_file)
        throw std::invalid_argument("--reference is required unless --mode union");
    const Dataset reference = build_reference(sources, reference_file, mode);

    const Vector prior = load_prior(args.prior, static_cast<Eigen::Index>(sources.size()));
    const ValuationRun run =
        value_sources(sources, reference, parse_measure(args.measure), mode,
                      parse_tau_policy(args.tau), prior, args.config);
    emit(valuation_json(run).dump(2), args.out);
}

std::vector<StreamStep> load_stream_dir(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error(msg("'", dir.string(), "' is not a directory"));
    std::vector<std::pair<int, fs::path>> step_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("step_", 0) != 0) continue;
        try {
            step_dirs.emplace_back(std::stoi(name.substr(5)), entry.path());
        } catch (const std::exception&) {
            throw std::runtime_error(msg("cannot parse step index from '", name, "'"));
        }
    }
    if (step_dirs.empty())
        throw std::runtime_error(msg("no step_<t> directories under '", dir.string(), "'"));
    std::sort(step_dirs.begin(), step_dirs.end());

    std::vector<StreamStep> steps;
    for (const auto& [index, path] : step_dirs) {
        SourceCollection sources = load_source_dir(path);
        StreamStep step;
        step.step_index = index;
        step.per_source = sources.sources();
        steps.push_back(std::move(step));
    }
    return steps;
}

void run_continual(const ContinualArgs& args) {
    const ReferenceMode mode = parse_reference_mode(args.mode);
    const TauPolicy tau = parse_tau_policy(args.tau);
    if (tau.kind == TauPolicy::Kind::best)
        throw std::invalid_argument("streaming valuation does not support --tau best");

    std::vector<StreamStep> steps = load_stream_dir(args.stream);
    const SourceCollection first_step(steps.front().per_source);
    std::optional<Dataset> reference_file;
    if (!args.reference.empty()) reference_file = load_any(args.reference);
    if (mode != ReferenceMode::union_of_sources && !reference_file)
        throw std::invalid_argument("--reference is required unless --mode union");
    const Dataset reference = build_reference(first_step, reference_file, mode);

    const auto m = static_cast<Eigen::Index>(steps.front().per_source.size());
    std::optional<double> explicit_tau;
    if (tau.kind == TauPolicy::Kind::fixed) explicit_tau = tau.value;

    VectorStreamFeed feed(std::move(steps));
    const PosteriorTrajectory trajectory =
        run_stream(feed, reference, annotator_recipe(parse_measure(args.measure), mode),
                   uniform_prior(m), explicit_tau, args.config);
    emit(trajectory_to_json(trajectory), args.out);
}

void run_augment(const AugmentArgs& args) {
    const Dataset train_set = load_any(args.train_path);
    const std::vector<Augmentor> augmentors = load_augmentor_spec(args.augmentors);
    const Model universal = load_model(args.universal);
    const TauPolicy tau = parse_tau_policy(args.tau);
    if (tau.kind == TauPolicy::Kind::best)
        throw std::invalid_argument(
            "--tau best is only available through the experiment command");
    std::optional<double> explicit_tau;
    if (tau.kind == TauPolicy::Kind::fixed) explicit_tau = tau.value;

    const Valuation valuation = augmentation_valuation(
        train_set, augmentors, universal, parse_measure(args.measure),
        uniform_prior(static_cast<Eigen::Index>(augmentors.size())), explicit_tau, args.seed);
    emit(valuation_to_json(valuation), args.out);

    if (!args.fit_out.empty()) {
        const AugmentSampling sampling = args.sampling == "per_image"
                                             ? AugmentSampling::per_image
                                             : AugmentSampling::per_batch;
        const Model fitted =
            train_augmented(train_set, augmentors, valuation, args.config, sampling);
        save_model(fitted, args.fit_out);
        std::printf("wrote %s\n", args.fit_out.c_str());
    }
}

void run_synth(const SynthArgs& args) {
    if (args.noise != "linear")
        throw std::invalid_argument(msg("unknown noise model '", args.noise,
                                        "'; only 'linear' is available"));
    const AnnotatorFixture fixture = make_annotator_fixture(args.params);
    const fs::path out(args.out);
    fs::create_directories(out / "sources");
    for (std::size_t s = 0; s < fixture.sources.size(); ++s)
        save_dataset(fixture.sources.dataset(s),
                     out / "sources" / (fixture.sources.id(s) + ".ddvm"), FileFormat::ddvm);
    save_dataset(fixture.reference, out / "reference.ddvm", FileFormat::ddvm);
    save_dataset(fixture.test, out / "test.ddvm", FileFormat::ddvm);

    json meta{{"classes", args.params.classes},
              {"dim", args.params.dim},
              {"per_class", args.params.per_class},
              {"sources", args.params.sources},
              {"ref_per_class", args.params.ref_per_class},
              {"test_per_class", args.params.test_per_class},
              {"separation", args.params.separation},
              {"seed", args.params.seed},
              {"noise", args.noise},
              {"epsilons", fixture.epsilons}};

    if (args.stream_steps > 0) {
        const NoiseSpec noise = linear_noise(args.params.sources,
                                             mix_seed(args.params.seed, 201));
        const auto steps = split_stream(fixture.clean_sources, args.stream_steps, noise,
                                        mix_seed(args.params.seed, 202));
        json stream_meta = json::array();
        for (const auto& step : steps) {
            const fs::path step_dir =
                out / "stream" / ("step_" + std::to_string(step.step_index));
            fs::create_directories(step_dir);
            for (const auto& [id, dataset] : step.per_source)
                save_dataset(dataset, step_dir / (id + ".ddvm"), FileFormat::ddvm);
            stream_meta.push_back({{"step", step.step_index},
                                   {"epsilons", step.epsilons},
                                   {"noise_permutation", step.noise_permutation}});
        }
        meta["stream"] = stream_meta;
    }

    std::ofstream meta_out(out / "meta.json");
    if (!meta_out)
        throw std::runtime_error(msg("cannot open '", (out / "meta.json").string(),
                                     "' for writing"));
    meta_out << meta.dump(2) << '\n';
    std::printf("wrote fixture under %s\n", out.string().c_str());
}

void assert_experiment(Scenario scenario, const std::vector<ExperimentReport>& reports) {
    const auto n = reports.size();
    const auto need = [n](double fraction) {
        return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    };
    const auto fail = [](const std::string& why) { throw AssertFailure(why); };

    switch (scenario) {
        case Scenario::annotator: {
            std::size_t decreasing = 0, baseline_wins = 0;
            double gbv = 0.0, uniform = 0.0;
            for (const auto& report : reports) {
                const Vector& p = report.valuation.posterior;
                bool ordered = true;
                for (Eigen::Index i = 0; i + 1 < p.size(); ++i)
                    ordered = ordered && p(i) > p(i + 1);
                if (ordered) ++decreasing;
                gbv += report.final_accuracy.at("gbv");
                uniform += report.final_accuracy.at("uniform");
                if (report.final_accuracy.at("gbv") >=
                    report.final_accuracy.at("mmd_baseline"))
                    ++baseline_wins;
            }
            if (decreasing < need(0.9))
                fail(msg("posterior strictly decreasing in ", decreasing, "/", n,
                         " seeds, need ", need(0.9)));
            if (!(gbv > uniform))
                fail(msg("mean gbv accuracy ", gbv / n, " does not exceed uniform ",
                         uniform / n));
            if (baseline_wins < need(0.7))
                fail(msg("gbv >= mmd baseline in ", baseline_wins, "/", n, " seeds, need ",
                         need(0.7)));
            return;
        }
        case Scenario::correlation: {
            const bool unioned =
                reports.front().config.reference_mode == ReferenceMode::union_of_sources;
            const double threshold = unioned ? 0.6 : 0.85;
            const std::size_t quota = unioned ? need(0.8) : need(0.9);
            std::size_t good = 0;
            for (const auto& report : reports)
                if (report.correlation.at("gbv") >= threshold) ++good;
            if (good < quota)
                fail(msg("correlation >= ", threshold, " in ", good, "/", n, " seeds, need ",
                         quota));
            return;
        }
        case Scenario::continual: {
            std::size_t good = 0;
            for (const auto& report : reports) {
                const double cgbv = report.final_accuracy.at("cgbv");
                if (cgbv >= report.final_accuracy.at("no_update") &&
                    cgbv >= report.final_accuracy.at("average"))
                    ++good;
            }
            if (good < need(0.8))
                fail(msg("cgbv >= both baselines in ", good, "/", n, " seeds, need ",
                         need(0.8)));
            return;
        }
        case Scenario::augmentation: {
            std::size_t identity_wins = 0;
            double gbv = 0.0, uniform = 0.0;
            for (const auto& report : reports) {
                const auto& ids = report.valuation.source_ids;
                Eigen::Index identity_at = -1, noise_at = -1;
                double worst_noise = -1.0;
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    const auto& aug = report.config.augmentors.at(i);
                    if (aug.op == AugmentOp::identity)
                        identity_at = static_cast<Eigen::Index>(i);
                    if (aug.op == AugmentOp::add_gaussian_noise &&
                        aug.magnitude > worst_noise) {
                        worst_noise = aug.magnitude;
                        noise_at = static_cast<Eigen::Index>(i);
                    }
                }
                if (identity_at < 0 || noise_at < 0)
                    fail("augmentor set lacks identity or gaussian noise");
                if (report.valuation.posterior(identity_at) >
                    report.valuation.posterior(noise_at))
                    ++identity_wins;
                gbv += report.final_accuracy.at("gbv");
                uniform += report.final_accuracy.at("uniform");
            }
            if (identity_wins != n)
                fail(msg("identity above the strongest noise in ", identity_wins, "/", n,
                         " seeds, need all"));
            if (!(gbv >= uniform))
                fail(msg("mean gbv accuracy ", gbv / n, " below uniform ", uniform / n));
            return;
        }
    }
}

void run_experiment_cmd(const ExperimentArgs& args) {
    const Scenario scenario = parse_scenario(args.scenario);
    const auto seeds = parse_seed_range(args.seeds);
    std::vector<ExperimentReport> reports;
    for (const auto seed : seeds) {
        ExperimentConfig config = default_config(scenario, seed);
        if (!args.measure.empty()) config.measure = parse_measure(args.measure);
        if (!args.mode.empty()) config.reference_mode = parse_reference_mode(args.mode);
        if (!args.tau.empty()) {
            const TauPolicy tau = parse_tau_policy(args.tau);
            if (tau.kind == TauPolicy::Kind::best) {
                config.search_tau = true;
            } else if (tau.kind == TauPolicy::Kind::fixed) {
                config.tau = tau.value;
                config.search_tau = false;
            }
        }
        if (args.search_tau) config.search_tau = true;
        if (args.stream_steps > 0) config.stream_steps = args.stream_steps;

        ExperimentReport report = run_experiment(config);
        const fs::path path = seeded_path(args.out, seed, seeds.size() > 1);
        write_report(report, path);
        std::printf("seed %llu: wrote %s\n", static_cast<unsigned long long>(seed),
                    path.string().c_str());
        reports.push_back(std::move(report));
    }
    if (args.enforce) assert_experiment(scenario, reports);
}

void run_correlate(const CorrelateArgs& args) {
    const SourceCollection sources = load_source_dir(args.sources);
    const ReferenceMode mode = parse_reference_mode(args.mode);
    std::optional<Dataset> reference_file;
    if (!args.reference.empty()) reference_file = load_any(args.reference);
    if (mode != ReferenceMode::union_of_sources && !reference_file)
        throw std::invalid_argument("--reference is required unless --mode union");
    const Dataset reference = build_reference(sources, reference_file, mode);
    const Dataset test = load_any(args.test);

    const ValuationRun run =
        value_sources(sources, reference, parse_measure(args.measure), mode,
                      parse_tau_policy(args.tau), uniform_prior(static_cast<Eigen::Index>(
                                                      sources.size())), args.config);

    Vector accs(static_cast<Eigen::Index>(run.scored.size()));
    for (std::size_t i = 0; i < run.scored.size(); ++i) {
        if (!run.scored[i].model)
            throw std::invalid_argument(
                "correlate needs a measure that trains per-source models");
        accs(static_cast<Eigen::Index>(i)) = accuracy(*run.scored[i].model, test);
    }
    const double r = pearson(run.valuation.posterior, accs);

    json out = valuation_json(run);
    out["pearson"] = r;
    out["per_source_accuracy"] = vector_to_json(accs);
    emit(out.dump(2), args.out);

    if (args.enforce && r < args.min_r)
        throw AssertFailure(msg("pearson ", r, " below required minimum ", args.min_r));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"valuing data distributions against a reference set"};
    app.require_subcommand(1);

    ConvertArgs convert_args;
    auto* convert = app.add_subcommand("convert", "convert a dataset between csv and ddvm");
    convert->add_option("--in", convert_args.in, "input dataset")->required();
    convert->add_option("--out", convert_args.out, "output path")->required();
    convert->add_option("--format", convert_args.format, "output format: csv or ddvm")
        ->required();
    convert->add_option("--classes", convert_args.classes,
                        "class count override for csv inputs");
    convert->callback([&] { run_convert(convert_args); });

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a softmax classifier");
    train_cmd->add_option("--sources", train_args.sources, "directory of source datasets");
    train_cmd->add_option("--data", train_args.data, "single training dataset");
    train_cmd->add_option("--out", train_args.out, "model output path")->required();
    train_cmd->add_option("--valuation", train_args.valuation,
                          "valuation JSON weighting the sources");
    add_train_flags(train_cmd, train_args.config);
    train_cmd->callback([&] { run_train(train_args); });

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "transferability score of data against a target");
    score->add_option("--measure", score_args.measure, "leep, logme, etran, mmd, or cmmd");
    score->add_option("--model", score_args.model, "model JSON (required except raw mmd)");
    score->add_option("--data", score_args.data, "source dataset")->required();
    score->add_option("--target", score_args.target, "target dataset")->required();
    score->add_option("--classes", score_args.classes, "class count override for csv inputs");
    score->add_option("--bandwidth", score_args.bandwidth,
                      "fixed RBF bandwidth (default: median heuristic)");
    score->add_flag("--probe-features", score_args.probe_features,
                    "run mmd on model-extracted features");
    score->callback([&] { run_score(score_args); });

    ValueArgs value_args;
    auto* value = app.add_subcommand("value", "posterior valuation of a source directory");
    value->add_option("--sources", value_args.sources, "directory of source datasets")
        ->required();
    value->add_option("--reference", value_args.reference, "reference dataset");
    value->add_option("--measure", value_args.measure, "transferability measure");
    value->add_option("--mode", value_args.mode, "labeled, unlabeled, or union");
    value->add_option("--tau", value_args.tau, "quick, best, or a positive number");
    value->add_option("--prior", value_args.prior, "uniform or a JSON array file");
    value->add_option("--out", value_args.out, "output path (default stdout)");
    add_train_flags(value, value_args.config);
    value->callback([&] { run_value(value_args); });

    ContinualArgs continual_args;
    auto* continual =
        app.add_subcommand("continual", "fold a stream of steps into a posterior trajectory");
    continual->add_option("--stream", continual_args.stream,
                          "directory of step_<t> subdirectories")
        ->required();
    continual->add_option("--reference", continual_args.reference, "reference dataset");
    continual->add_option("--measure", continual_args.measure, "transferability measure");
    continual->add_option("--mode", continual_args.mode, "labeled, unlabeled, or union");
    continual->add_option("--tau", continual_args.tau, "quick or a positive number");
    continual->add_option("--out", continual_args.out, "output path (default stdout)");
    add_train_flags(continual, continual_args.config);
    continual->callback([&] { run_continual(continual_args); });

    AugmentArgs augment_args;
    auto* augment = app.add_subcommand("augment", "value augmentors under a universal model");
    augment->add_option("--train", augment_args.train_path, "training dataset")->required();
    augment->add_option("--augmentors", augment_args.augmentors, "augmentor spec JSON")
        ->required();
    augment->add_option("--universal", augment_args.universal, "universal model JSON")
        ->required();
    augment->add_option("--measure", augment_args.measure, "transferability measure");
    augment->add_option("--tau", augment_args.tau, "quick or a positive number");
    augment->add_option("--seed", augment_args.seed, "augmentation seed");
    augment->add_option("--out", augment_args.out, "valuation output path (default stdout)");
    augment->add_option("--fit-out", augment_args.fit_out,
                        "also train with sampled augmentors and write the model here");
    augment->add_option("--sampling", augment_args.sampling, "per_batch or per_image");
    add_train_flags(augment, augment_args.config, "--train-seed");
    augment->callback([&] { run_augment(augment_args); });

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "write a synthetic annotator fixture");
    synth->add_option("--classes", synth_args.params.classes, "number of classes");
    synth->add_option("--dim", synth_args.params.dim, "feature dimension");
    synth->add_option("--per-class", synth_args.params.per_class,
                      "samples per class per source");
    synth->add_option("--sources", synth_args.params.sources, "number of sources");
    synth->add_option("--ref-per-class", synth_args.params.ref_per_class,
                      "reference samples per class");
    synth->add_option("--test-per-class", synth_args.params.test_per_class,
                      "test samples per class");
    synth->add_option("--separation", synth_args.params.separation,
                      "minimum class mean separation");
    synth->add_option("--noise", synth_args.noise, "noise model (linear)");
    synth->add_option("--seed", synth_args.params.seed, "generator seed");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--stream-steps", synth_args.stream_steps,
                      "also write a noise-permuted stream with this many steps");
    synth->callback([&] { run_synth(synth_args); });

    ExperimentArgs experiment_args;
    auto* experiment = app.add_subcommand("experiment", "run a benchmark scenario end to end");
    experiment->add_option("--scenario", experiment_args.scenario,
                           "annotator, augmentation, continual, or correlation")
        ->required();
    experiment->add_option("--seeds", experiment_args.seeds, "seed or inclusive range a..b");
    experiment->add_option("--out", experiment_args.out, "report path (seed-suffixed "
                           "when several seeds are given)")
        ->required();
    experiment->add_option("--measure", experiment_args.measure, "measure override");
    experiment->add_option("--mode", experiment_args.mode, "reference mode override");
    experiment->add_option("--tau", experiment_args.tau, "quick, best, or a number");
    experiment->add_flag("--search-tau", experiment_args.search_tau,
                         "grid-search the temperature");
    experiment->add_option("--stream-steps", experiment_args.stream_steps,
                           "continual stream length override");
    experiment->add_flag("--assert", experiment_args.enforce,
                         "exit 2 when the scenario thresholds fail");
    experiment->callback([&] { run_experiment_cmd(experiment_args); });

    CorrelateArgs correlate_args;
    auto* correlate =
        app.add_subcommand("correlate", "posterior vs held-out per-source accuracy");
    correlate->add_option("--sources", correlate_args.sources, "directory of source datasets")
        ->required();
    correlate->add_option("--reference", correlate_args.reference, "reference dataset");
    correlate->add_option("--test", correlate_args.test, "held-out test dataset")->required();
    correlate->add_option("--measure", correlate_args.measure, "transferability measure");
    correlate->add_option("--mode", correlate_args.mode, "labeled, unlabeled, or union");
    correlate->add_option("--tau", correlate_args.tau, "quick, best, or a positive number");
    correlate->add_option("--out", correlate_args.out, "output path (default stdout)");
    correlate->add_option("--min-r", correlate_args.min_r,
                          "minimum pearson correlation for --assert");
    correlate->add_flag("--assert", correlate_args.enforce,
                        "exit 2 when the correlation falls below --min-r");
    add_train_flags(correlate, correlate_args.config);
    correlate->callback([&] { run_correlate(correlate_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        return app.exit(error);
    } catch (const AssertFailure& error) {
        std::cerr << "assertion failed: " << error.what() << '\n';
        return 2;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 1;
    }
    return 0;
}
