#include "distval/augment.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace distval {

AugmentOp parse_augment_op(const std::string& name) {
    if (name == "identity") return AugmentOp::identity;
    if (name == "add_gaussian_noise" || name == "gaussian_noise")
        return AugmentOp::add_gaussian_noise;
    if (name == "scale") return AugmentOp::scale;
    if (name == "rotate_plane" || name == "rotate") return AugmentOp::rotate_plane;
    if (name == "feature_dropout" || name == "dropout") return AugmentOp::feature_dropout;
    throw std::invalid_argument(msg("unknown augment operator '", name, "'"));
}

std::string augment_op_name(AugmentOp op) {
    switch (op) {
        case AugmentOp::identity: return "identity";
        case AugmentOp::add_gaussian_noise: return "add_gaussian_noise";
        case AugmentOp::scale: return "scale";
        case AugmentOp::rotate_plane: return "rotate_plane";
        case AugmentOp::feature_dropout: return "feature_dropout";
    }
    throw std::logic_error("unreachable");
}

std::string Augmentor::name() const {
    if (op == AugmentOp::identity) return "identity";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s@%g", augment_op_name(op).c_str(), magnitude);
    return buf;
}

void validate(const Augmentor& augmentor) {
    const double a = augmentor.magnitude;
    switch (augmentor.op) {
        case AugmentOp::identity:
            if (a != 0.0)
                throw std::invalid_argument("identity has a fixed magnitude of 0");
            return;
        case AugmentOp::add_gaussian_noise:
            if (!(a >= 0))
                throw std::invalid_argument(msg("noise magnitude must be >= 0, got ", a));
            return;
        case AugmentOp::scale:
            if (!(a >= 0))
                throw std::invalid_argument(msg("scale magnitude must be >= 0, got ", a));
            return;
        case AugmentOp::rotate_plane:
            if (!(a >= -180.0 && a <= 180.0))
                throw std::invalid_argument(
                    msg("rotation angle must be in [-180, 180] degrees, got ", a));
            if (augmentor.axis_a == augmentor.axis_b || augmentor.axis_a < 0 ||
                augmentor.axis_b < 0)
                throw std::invalid_argument("rotate_plane needs two distinct nonnegative axes");
            return;
        case AugmentOp::feature_dropout:
            if (!(a >= 0.0 && a <= 1.0))
                throw std::invalid_argument(msg("dropout fraction must be in [0, 1], got ", a));
            return;
    }
    throw std::logic_error("unreachable");
}

Matrix apply(const Augmentor& augmentor, const Matrix& features, std::uint64_t seed) {
    validate(augmentor);
    switch (augmentor.op) {
        case AugmentOp::identity:
            return features;
        case AugmentOp::add_gaussian_noise: {
            if (augmentor.magnitude == 0.0) return features;
            Matrix out = features;
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (Eigen::Index i = 0; i < out.rows(); ++i)
                for (Eigen::Index j = 0; j < out.cols(); ++j)
                    out(i, j) += augmentor.magnitude * normal(rng);
            return out;
        }
        case AugmentOp::scale:
            return augmentor.magnitude * features;
        case AugmentOp::rotate_plane: {
            if (features.cols() < 2)
                throw std::invalid_argument("rotate_plane requires at least 2 feature columns");
            if (augmentor.axis_a >= features.cols() || augmentor.axis_b >= features.cols())
                throw std::invalid_argument(
                    msg("rotation axes (", augmentor.axis_a, ", ", augmentor.axis_b,
                        ") out of range for dim ", features.cols()));
            const double theta = augmentor.magnitude * M_PI / 180.0;
            const double c = std::cos(theta), s = std::sin(theta);
            Matrix out = features;
            const auto a = augmentor.axis_a, b = augmentor.axis_b;
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                const double xa = features(i, a), xb = features(i, b);
                out(i, a) = c * xa - s * xb;
                out(i, b) = s * xa + c * xb;
            }
            return out;
        }
        case AugmentOp::feature_dropout: {
            Matrix out = features;
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            for (Eigen::Index i = 0; i < out.rows(); ++i)
                for (Eigen::Index j = 0; j < out.cols(); ++j)
                    if (uniform(rng) < augmentor.magnitude) out(i, j) = 0.0;
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

Dataset apply(const Augmentor& augmentor, const Dataset& dataset, std::uint64_t seed) {
    return Dataset(apply(augmentor, dataset.features(), seed), dataset.labels(),
                   dataset.num_classes(), dataset.labels_usable());
}

std::vector<Augmentor> discretize(AugmentOp op, double lo, double hi, int k) {
    if (!(lo <= hi)) throw std::invalid_argument(msg("invalid range [", lo, ", ", hi, "]"));
    if (k < 1) throw std::invalid_argument(msg("k must be >= 1, got ", k));
    std::vector<Augmentor> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double magnitude =
            (k == 1) ? 0.5 * (lo + hi)
                     : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
        Augmentor aug{op, magnitude};
        validate(aug);
        out.push_back(aug);
    }
    return out;
}

namespace {

std::vector<Augmentor> parse_spec_json(const nlohmann::json& spec) {
    if (!spec.is_array()) throw std::runtime_error("augmentor spec must be a JSON array");
    std::vector<Augmentor> out;
    for (const auto& entry : spec) {
        const auto op = parse_augment_op(entry.at("operator").get<std::string>());
        Augmentor base{op, 0.0};
        if (entry.contains("axes")) {
            const auto axes = entry.at("axes").get<std::vector<int>>();
            if (axes.size() != 2)
                throw std::runtime_error("augmentor 'axes' must hold exactly two indices");
            base.axis_a = axes[0];
            base.axis_b = axes[1];
        }
        if (entry.contains("range")) {
            const auto range = entry.at("range").get<std::vector<double>>();
            if (range.size() != 2)
                throw std::runtime_error("augmentor 'range' must hold [lo, hi]");
            const int k = entry.value("k", 5);
            for (auto aug : discretize(op, range[0], range[1], k)) {
                aug.axis_a = base.axis_a;
                aug.axis_b = base.axis_b;
                out.push_back(aug);
            }
        } else {
            base.magnitude = entry.value("magnitude", 0.0);
            validate(base);
            out.push_back(base);
        }
    }
    if (out.empty()) throw std::runtime_error("augmentor spec is empty");
    return out;
}

}  // namespace

std::vector<Augmentor> parse_augmentor_spec(const std::string& json_text) {
    return parse_spec_json(nlohmann::json::parse(json_text));
}

std::vector<Augmentor> load_augmentor_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(msg("cannot open '", path.string(), "' for reading"));
    nlohmann::json spec;
    in >> spec;
    return parse_spec_json(spec);
}

std::size_t sample_index(const Vector& probabilities, std::mt19937_64& rng) {
    if (probabilities.size() < 1) throw std::invalid_argument("empty probability vector");
    if (std::abs(probabilities.sum() - 1.0) > 1e-6)
        throw std::invalid_argument(
            msg("probabilities sum to ", probabilities.sum(), ", expected 1"));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = uniform(rng);
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        cumulative += probabilities(i);
        if (u < cumulative) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(probabilities.size() - 1);
}

const Augmentor& sample_augmentor(const Valuation& valuation,
                                  const std::vector<Augmentor>& augmentors,
                                  std::mt19937_64& rng) {
    if (valuation.posterior.size() != static_cast<Eigen::Index>(augmentors.size()))
        throw std::invalid_argument(msg("valuation covers ", valuation.posterior.size(),
                                        " augmentors but ", augmentors.size(), " were given"));
    return augmentors[sample_index(valuation.posterior, rng)];
}

Model train_augmented(const Dataset& train_set, const std::vector<Augmentor>& augmentors,
                      const Valuation& valuation, const TrainConfig& config,
                      AugmentSampling sampling) {
    validate(config);
    validate(valuation);
    if (valuation.posterior.size() != static_cast<Eigen::Index>(augmentors.size()))
        throw std::invalid_argument(msg("valuation covers ", valuation.posterior.size(),
                                        " augmentors but ", augmentors.size(), " were given"));
    std::mt19937_64 rng(config.seed);
    Model model{Matrix::Zero(train_set.dim(), train_set.num_classes()),
                Vector::Zero(train_set.num_classes())};
    for (int iter = 0; iter < config.iterations; ++iter) {
        Matrix batch;
        if (sampling == AugmentSampling::per_batch) {
            const auto& aug = sample_augmentor(valuation, augmentors, rng);
            batch = apply(aug, train_set.features(), rng());
        } else {
            batch = Matrix(train_set.size(), train_set.dim());
            for (Eigen::Index i = 0; i < train_set.size(); ++i) {
                const auto& aug = sample_augmentor(valuation, augmentors, rng);
                batch.row(i) = apply(aug, train_set.features().row(i), rng()).row(0);
            }
        }
        const auto g =
            detail::softmax_ce_batch(batch, train_set.labels(), model.weights, model.bias);
        model.weights -= config.learning_rate * (g.grad_w + config.l2 * model.weights);
        model.bias -= config.learning_rate * (g.grad_b + config.l2 * model.bias);
        if (!model.weights.allFinite() || !model.bias.allFinite())
            throw std::runtime_error(msg("non-finite loss at iteration ", iter,
                                         "; learning rate ", config.learning_rate,
                                         " is too large"));
    }
    return model;
}

}  // namespace distval
