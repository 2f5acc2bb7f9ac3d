#ifndef DISTVAL_TRANSFERABILITY_HPP
#define DISTVAL_TRANSFERABILITY_HPP

#include <optional>
#include <string>

#include "distval/common.hpp"

namespace distval {

enum class Measure { leep, logme, etran_energy, neg_mmd, cond_neg_mmd };

Measure parse_measure(const std::string& name);
std::string measure_name(Measure measure);
bool measure_needs_labels(Measure measure);

struct TransferabilityScore {
    double value = 0.0;
    Measure measure = Measure::leep;
};

/// RBF kernel spec; bandwidth resolved by the median heuristic when unset.
struct KernelSpec {
    std::optional<double> bandwidth;  // sigma; must be > 0 when explicit
};

/// Log expected empirical prediction. `probs` holds the source model's
/// pseudo-class probabilities (rows sum to 1), `labels` the target labels
/// over `num_classes` classes. Builds the empirical joint of pseudo-class
/// and target label and returns the average log-likelihood of the induced
/// predictor. Always <= 0; a 1e-12 floor inside the log guards degenerate
/// joints.
TransferabilityScore leep(const Matrix& probs, const Labels& labels, int num_classes);

/// Log maximum evidence of a Bayesian linear model from features to the
/// per-class one-hot targets, maximized over prior/noise precisions by the
/// SVD fixed-point iteration and averaged per sample and per class.
TransferabilityScore logme(const Matrix& features, const Labels& labels, int num_classes);

/// Label-free energy score: mean row-wise log-sum-exp of the features.
TransferabilityScore etran_energy(const Matrix& features);

/// Negated biased squared MMD between the two sample sets under an RBF
/// kernel. Class-conditional mode averages per-class values over classes
/// present in both sets (absent classes are skipped with a warning).
TransferabilityScore neg_mmd(const Matrix& sample, const Matrix& reference,
                             const KernelSpec& kernel = {}, bool class_conditional = false,
                             const Labels* sample_labels = nullptr,
                             const Labels* reference_labels = nullptr);

/// Median of pairwise Euclidean distances over all distinct unordered row
/// pairs of the stacked matrices; falls back to 1.0 when the median is 0.
double median_heuristic_bandwidth(const Matrix& sample, const Matrix& reference);

}  // namespace distval

#endif
