#include "distval/classifier.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace distval {

void validate(const TrainConfig& config) {
    if (!(config.learning_rate > 0))
        throw std::invalid_argument(msg("learning_rate must be > 0, got ", config.learning_rate));
    if (config.iterations < 0)
        throw std::invalid_argument(msg("iterations must be >= 0, got ", config.iterations));
    if (config.l2 < 0) throw std::invalid_argument(msg("l2 must be >= 0, got ", config.l2));
}

namespace detail {

CeGrad softmax_ce_batch(const Matrix& features, const Labels& labels, const Matrix& weights,
                        const Vector& bias) {
    const auto n = features.rows();
    const auto c = weights.cols();
    Matrix logits = features * weights;
    logits.rowwise() += bias.transpose();

    CeGrad out{0.0, Matrix::Zero(weights.rows(), c), Vector::Zero(c)};
    Matrix probs(n, c);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double row_max = logits.row(i).maxCoeff();
        const Vector shifted = (logits.row(i).array() - row_max).exp();
        const double denom = shifted.sum();
        probs.row(i) = shifted.transpose() / denom;
        // logsumexp form keeps the loss finite for any finite logits
        loss += std::log(denom) + row_max - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < n; ++i) probs(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss = loss * inv_n;
    out.grad_w = features.transpose() * probs * inv_n;
    out.grad_b = probs.colwise().sum().transpose() * inv_n;
    return out;
}

}  // namespace detail

namespace {

void check_dims(const Model& model, const Matrix& features) {
    if (features.cols() != model.weights.rows())
        throw std::invalid_argument(msg("feature dim ", features.cols(),
                                        " does not match model dim ", model.dim()));
}

Vector resolve_weights(const SourceCollection& sources, const std::optional<Valuation>& weights) {
    const auto m = static_cast<Eigen::Index>(sources.size());
    if (!weights) return Vector::Constant(m, 1.0 / static_cast<double>(m));
    validate(*weights);
    if (weights->size() != m)
        throw std::invalid_argument(msg("valuation covers ", weights->size(),
                                        " sources but the collection has ", m));
    for (Eigen::Index i = 0; i < m; ++i) {
        if (weights->source_ids[static_cast<std::size_t>(i)] != sources.id(i))
            throw std::invalid_argument(
                msg("valuation source id '", weights->source_ids[static_cast<std::size_t>(i)],
                    "' does not match collection id '", sources.id(i), "' at position ", i));
    }
    return weights->posterior;
}

}  // namespace

double weighted_loss(const Model& model, const SourceCollection& sources,
                     const Vector& source_weights, double l2) {
    double loss = 0.0;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const double w = source_weights(static_cast<Eigen::Index>(s));
        if (w == 0.0) continue;
        const auto& ds = sources.dataset(s);
        loss += w * detail::softmax_ce_batch(ds.features(), ds.labels(), model.weights,
                                             model.bias)
                        .loss;
    }
    loss += 0.5 * l2 * (model.weights.squaredNorm() + model.bias.squaredNorm());
    return loss;
}

std::pair<Matrix, Vector> weighted_loss_gradient(const Model& model,
                                                 const SourceCollection& sources,
                                                 const Vector& source_weights, double l2) {
    Matrix grad_w = Matrix::Zero(model.weights.rows(), model.weights.cols());
    Vector grad_b = Vector::Zero(model.bias.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const double w = source_weights(static_cast<Eigen::Index>(s));
        if (w == 0.0) continue;
        const auto& ds = sources.dataset(s);
        const auto g =
            detail::softmax_ce_batch(ds.features(), ds.labels(), model.weights, model.bias);
        grad_w += w * g.grad_w;
        grad_b += w * g.grad_b;
    }
    grad_w += l2 * model.weights;
    grad_b += l2 * model.bias;
    return {std::move(grad_w), std::move(grad_b)};
}

Model train(const SourceCollection& sources, const std::optional<Valuation>& weights,
            const TrainConfig& config) {
    validate(config);
    const Vector w = resolve_weights(sources, weights);
    const int d = sources.dim();
    const int c = sources.num_classes();
    Model model{Matrix::Zero(d, c), Vector::Zero(c)};
    for (int iter = 0; iter < config.iterations; ++iter) {
        auto [grad_w, grad_b] = weighted_loss_gradient(model, sources, w, config.l2);
        model.weights -= config.learning_rate * grad_w;
        model.bias -= config.learning_rate * grad_b;
        if (!model.weights.allFinite() || !model.bias.allFinite())
            throw std::runtime_error(msg("non-finite loss at iteration ", iter,
                                         "; learning rate ", config.learning_rate,
                                         " is too large"));
    }
    return model;
}

Model train(const Dataset& dataset, const TrainConfig& config) {
    std::vector<std::pair<std::string, Dataset>> one;
    one.emplace_back("data", dataset);
    return train(SourceCollection(std::move(one)), std::nullopt, config);
}

Matrix predict_proba(const Model& model, const Matrix& features) {
    check_dims(model, features);
    Matrix logits = extract_features(model, features);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double row_max = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - row_max).exp();
        logits.row(i) /= logits.row(i).sum();
    }
    return logits;
}

Matrix extract_features(const Model& model, const Matrix& features) {
    check_dims(model, features);
    Matrix logits = features * model.weights;
    logits.rowwise() += model.bias.transpose();
    return logits;
}

double accuracy(const Model& model, const Dataset& dataset) {
    const Matrix probs = predict_proba(model, dataset.features());
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j)
            if (probs(i, j) > probs(i, best)) best = j;  // ties keep the smaller index
        if (best == dataset.labels()[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

void save_model(const Model& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["d"] = model.dim();
    j["C"] = model.num_classes();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(model.weights.size()));
    for (Eigen::Index i = 0; i < model.weights.rows(); ++i)
        for (Eigen::Index k = 0; k < model.weights.cols(); ++k) w.push_back(model.weights(i, k));
    j["weights"] = w;
    j["bias"] = std::vector<double>(model.bias.data(), model.bias.data() + model.bias.size());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(msg("cannot open '", path.string(), "' for writing"));
    out << j.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(msg("cannot open '", path.string(), "' for reading"));
    nlohmann::json j;
    in >> j;
    const int d = j.at("d").get<int>();
    const int c = j.at("C").get<int>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != d * c || static_cast<int>(b.size()) != c)
        throw std::runtime_error(msg("model file '", path.string(), "' has inconsistent shapes"));
    Model model{Matrix(d, c), Vector(c)};
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < c; ++k) model.weights(i, k) = w[static_cast<std::size_t>(i * c + k)];
    for (int k = 0; k < c; ++k) model.bias(k) = b[static_cast<std::size_t>(k)];
    if (!model.weights.allFinite() || !model.bias.allFinite())
        throw std::runtime_error(msg("model file '", path.string(), "' has non-finite parameters"));
    return model;
}

}  // namespace distval
