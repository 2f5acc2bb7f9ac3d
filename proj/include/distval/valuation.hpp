#ifndef DISTVAL_VALUATION_HPP
#define DISTVAL_VALUATION_HPP

#include <optional>

#include "distval/augment.hpp"
#include "distval/classifier.hpp"
#include "distval/dataset.hpp"
#include "distval/transferability.hpp"
#include "distval/valuation_types.hpp"

namespace distval {

enum class PhiKind { train_small_model, universal_model };
enum class VarphiKind { reference_set, sample_set };
enum class ReferenceMode { labeled, unlabeled_energy, union_of_sources };

ReferenceMode parse_reference_mode(const std::string& name);

/// How to turn a transferability measure into a generalized Bayesian loss:
/// which source model to use, which target set to score against, and how
/// the reference set is obtained.
struct ValuationRecipe {
    PhiKind phi = PhiKind::train_small_model;
    VarphiKind varphi = VarphiKind::reference_set;
    Measure measure = Measure::leep;
    ReferenceMode reference_mode = ReferenceMode::labeled;
};

ValuationRecipe annotator_recipe(Measure measure,
                                 ReferenceMode mode = ReferenceMode::labeled);
ValuationRecipe augmentation_recipe(Measure measure);

void validate(const ValuationRecipe& recipe);

/// Temperature heuristic 1/log2(M) for M >= 2 sources.
double quick_tau(int source_count);

/// Returns the explicit tau when given, otherwise quick_tau. A single
/// source valuation is a point mass for any temperature, so M = 1 resolves
/// to 1.0 without consulting quick_tau.
double resolve_tau(const std::optional<double>& explicit_tau, Eigen::Index source_count);

/// Posterior over sources: posterior[i] proportional to
/// prior[i] * exp(scores[i] / tau), normalized with max-subtraction.
/// Zero-prior sources receive zero posterior.
Valuation gbv_posterior(Vector prior, Vector scores, double tau,
                        std::vector<std::string> source_ids = {});

/// Resolves the reference set for a recipe: labeled passes it through,
/// unlabeled_energy strips the labels, union_of_sources concatenates all
/// source datasets in order.
Dataset build_reference(const SourceCollection& sources,
                        const std::optional<Dataset>& reference, ReferenceMode mode);

struct TransferOptions {
    KernelSpec kernel{};
    /// When set, MMD compares extract_features of both sets under `probe`
    /// (trained on the reference when absent) instead of raw features.
    bool mmd_on_probe_features = false;
    const Model* probe = nullptr;
};

/// Evaluates the chosen measure for one source: leep/logme/etran score the
/// model against the target set; the MMD variants compare the source
/// sample against the target set directly.
double transfer_score(Measure measure, const Model& model, const Dataset& source_data,
                      const Dataset& target, const TransferOptions& options = {});

struct SourceScore {
    std::string id;
    double score = 0.0;
    double seconds = 0.0;  // wall clock for this source's valuation
    std::optional<Model> model;
};

/// Per-source half of the annotator recipe: trains a small model on each
/// source (except for raw-feature MMD, which needs none) and scores it
/// against the reference.
std::vector<SourceScore> annotator_scores(const SourceCollection& sources,
                                          const Dataset& reference,
                                          const ValuationRecipe& recipe,
                                          const TrainConfig& train_config,
                                          const TransferOptions& options = {});

/// Full annotator valuation: per-source scores folded into the posterior.
Valuation annotator_valuation(const SourceCollection& sources, const Dataset& reference,
                              const ValuationRecipe& recipe, const Vector& prior,
                              const std::optional<double>& tau,
                              const TrainConfig& train_config,
                              const TransferOptions& options = {});

/// Augmentor valuation: materializes each transformed training set, scores
/// it under the universal model, and folds the scores into the posterior.
/// The training set itself acts as the reference.
Valuation augmentation_valuation(const Dataset& train_set,
                                 const std::vector<Augmentor>& augmentors,
                                 const Model& universal_model, Measure measure,
                                 const Vector& prior, const std::optional<double>& tau,
                                 std::uint64_t seed = 0,
                                 const TransferOptions& options = {});

}  // namespace distval

#endif
