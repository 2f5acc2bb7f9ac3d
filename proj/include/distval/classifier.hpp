#ifndef DISTVAL_CLASSIFIER_HPP
#define DISTVAL_CLASSIFIER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>

#include "distval/dataset.hpp"
#include "distval/valuation_types.hpp"

namespace distval {

/// Linear softmax classifier. Serves as the per-source small model, the
/// universal model for augmentor scoring, and the final weighted-training
/// target. Immutable once trained.
struct Model {
    Matrix weights;  // d x C
    Vector bias;     // C

    int dim() const { return static_cast<int>(weights.rows()); }
    int num_classes() const { return static_cast<int>(weights.cols()); }
};

struct TrainConfig {
    double learning_rate = 0.1;
    int iterations = 300;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

/// Weighted cross-entropy objective: sum over sources of
/// weight(s) * mean cross-entropy on that source, plus l2/2 * ||theta||^2
/// over all parameters. Source weights must be normalized.
double weighted_loss(const Model& model, const SourceCollection& sources,
                     const Vector& source_weights, double l2);

/// Analytic gradient of weighted_loss with respect to (weights, bias).
std::pair<Matrix, Vector> weighted_loss_gradient(const Model& model,
                                                 const SourceCollection& sources,
                                                 const Vector& source_weights, double l2);

/// Full-batch gradient descent on the weighted loss from zero
/// initialization. `weights` empty means uniform over sources; otherwise it
/// must index exactly the sources in the collection, in order.
/// Deterministic given inputs.
Model train(const SourceCollection& sources, const std::optional<Valuation>& weights,
            const TrainConfig& config);

/// Convenience overload: single dataset, uniform weight.
Model train(const Dataset& dataset, const TrainConfig& config);

/// Row-wise softmax of the logits; each row sums to 1.
Matrix predict_proba(const Model& model, const Matrix& features);

/// Pre-softmax logits x*W + b, used as the extracted feature map for
/// feature-space transferability scores.
Matrix extract_features(const Model& model, const Matrix& features);

/// Fraction of rows whose argmax probability matches the label. Argmax
/// ties break toward the smallest class index.
double accuracy(const Model& model, const Dataset& dataset);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Shared softmax cross-entropy step used by both the plain and the
// augmented trainer so their update arithmetic is identical.
namespace detail {
struct CeGrad {
    double loss;   // mean cross-entropy over the batch
    Matrix grad_w; // d x C
    Vector grad_b; // C
};
CeGrad softmax_ce_batch(const Matrix& features, const Labels& labels, const Matrix& weights,
                        const Vector& bias);
}  // namespace detail

}  // namespace distval

#endif
