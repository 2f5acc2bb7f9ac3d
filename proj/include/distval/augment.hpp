#ifndef DISTVAL_AUGMENT_HPP
#define DISTVAL_AUGMENT_HPP

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "distval/classifier.hpp"
#include "distval/dataset.hpp"
#include "distval/valuation_types.hpp"

namespace distval {

enum class AugmentOp { identity, add_gaussian_noise, scale, rotate_plane, feature_dropout };

AugmentOp parse_augment_op(const std::string& name);
std::string augment_op_name(AugmentOp op);

/// A label-preserving feature-space transform: an operator plus a real
/// magnitude. Operators without a magnitude fix it at 0.
struct Augmentor {
    AugmentOp op = AugmentOp::identity;
    double magnitude = 0.0;
    // rotate_plane only: the coordinate pair spanning the rotation plane
    int axis_a = 0;
    int axis_b = 1;

    std::string name() const;
};

/// Magnitude bounds per operator: identity {0}, noise sigma >= 0,
/// scale factor >= 0, rotation angle in [-180, 180] degrees,
/// dropout fraction in [0, 1]. Throws when out of range.
void validate(const Augmentor& augmentor);

/// Applies the transform row-wise; deterministic given the seed, labels
/// untouched by construction. rotate_plane needs d >= 2.
Matrix apply(const Augmentor& augmentor, const Matrix& features, std::uint64_t seed);

Dataset apply(const Augmentor& augmentor, const Dataset& dataset, std::uint64_t seed);

/// k magnitudes linearly spaced over [lo, hi] inclusive; k = 1 yields the
/// midpoint.
std::vector<Augmentor> discretize(AugmentOp op, double lo, double hi, int k);

/// Reads a JSON array of {"operator", and either "range"+"k" or
/// "magnitude"} entries into a flat augmentor list.
std::vector<Augmentor> load_augmentor_spec(const std::filesystem::path& path);
std::vector<Augmentor> parse_augmentor_spec(const std::string& json_text);

/// Draws an index with probability posterior[i].
std::size_t sample_index(const Vector& probabilities, std::mt19937_64& rng);

const Augmentor& sample_augmentor(const Valuation& valuation,
                                  const std::vector<Augmentor>& augmentors,
                                  std::mt19937_64& rng);

enum class AugmentSampling { per_batch, per_image };

/// Gradient descent over the training set where each step sees inputs
/// transformed by a freshly sampled augmentor. With a point mass on the
/// identity this reproduces plain train() exactly.
Model train_augmented(const Dataset& train_set, const std::vector<Augmentor>& augmentors,
                      const Valuation& valuation, const TrainConfig& config,
                      AugmentSampling sampling = AugmentSampling::per_batch);

}  // namespace distval

#endif
