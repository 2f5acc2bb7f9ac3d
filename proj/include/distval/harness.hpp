#ifndef DISTVAL_HARNESS_HPP
#define DISTVAL_HARNESS_HPP

#include <array>
#include <filesystem>
#include <map>
#include <optional>

#include "distval/augment.hpp"
#include "distval/continual.hpp"
#include "distval/synth.hpp"
#include "distval/valuation.hpp"

namespace distval {

/// Sample Pearson correlation; both vectors must be non-constant.
double pearson(const Vector& x, const Vector& y);

inline constexpr std::array<double, 5> kTauGrid{0.01, 0.05, 0.1, 0.5, 1.0};

struct TauSearch {
    double tau = 1.0;
    std::vector<double> grid;                // taus tried, in order
    std::vector<double> selection_accuracy;  // weighted-model accuracy per tau
};

/// Grid search over kTauGrid: for each tau, forms the posterior from the
/// given scores, trains the weighted final model, and keeps the tau whose
/// model scores highest on the selection set. Ties break toward the
/// larger tau (the weighting closest to the prior). The selection set
/// must be labeled.
TauSearch best_tau(const SourceCollection& sources, const Vector& scores, const Vector& prior,
                   const Dataset& selection_set, const TrainConfig& final_config);

/// Valuation baseline: per-source negated (class-conditional when labels
/// allow) squared MMD against the reference, passed through a softmax at
/// the given temperature.
Valuation mmd_softmax_baseline(const SourceCollection& sources, const Dataset& reference,
                               double temperature = 1.0, const KernelSpec& kernel = {});

enum class Scenario { annotator, augmentation, continual, correlation };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario scenario);

struct ExperimentConfig {
    Scenario scenario = Scenario::annotator;
    SynthParams synth{};
    Measure measure = Measure::leep;
    ReferenceMode reference_mode = ReferenceMode::labeled;
    std::optional<double> tau;  // unset: quick tau
    bool search_tau = false;    // grid search overrides tau
    TrainConfig source_model{0.1, 200, 1e-4, 0};
    TrainConfig final_model{0.1, 300, 1e-4, 0};
    int stream_steps = 4;               // continual only
    double baseline_temperature = 1.0;  // mmd softmax baseline
    std::vector<Augmentor> augmentors;  // augmentation only; empty: default set
    AugmentSampling sampling = AugmentSampling::per_batch;
    std::uint64_t seed = 0;
};

/// Scenario-appropriate starting config (measure, tau policy, fixture
/// knobs); callers override fields afterwards.
ExperimentConfig default_config(Scenario scenario, std::uint64_t seed = 0);

/// identity + 5 magnitudes each of gaussian noise (up to sigma 10), scale,
/// and feature dropout: 16 augmentors.
std::vector<Augmentor> default_augmentors();

struct ExperimentReport {
    static constexpr int schema_version = 1;

    ExperimentConfig config;
    Valuation valuation;  // the scenario's (final) posterior
    std::vector<double> source_accuracy;  // per-source model accuracy on the test set
    std::map<std::string, double> final_accuracy;
    std::map<std::string, double> correlation;
    std::map<std::string, std::vector<double>> step_accuracy;  // continual only
    std::optional<PosteriorTrajectory> trajectory;             // continual only
    std::optional<TauSearch> tau_search;
    std::vector<double> source_seconds;  // valuation phase only
};

ExperimentReport run_experiment(const ExperimentConfig& config);

struct TimingSummary {
    std::vector<double> per_source;
    double mean = 0.0;
    double standard_error = 0.0;
};

TimingSummary timing_report(const ExperimentReport& report);

/// Full report as JSON text. The payload variant drops the timing section
/// so that two runs of the same config can be compared byte for byte.
std::string report_to_json(const ExperimentReport& report, int indent = 2);
std::string report_payload(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::filesystem::path& path);

std::string valuation_to_json(const Valuation& valuation, int indent = 2);
std::string trajectory_to_json(const PosteriorTrajectory& trajectory, int indent = 2);

}  // namespace distval

#endif
