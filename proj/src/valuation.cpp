#include "distval/valuation.hpp"

#include <chrono>
#include <cmath>

namespace distval {

void validate(const Valuation& valuation, double tol) {
    const auto m = valuation.posterior.size();
    if (m < 1) throw std::invalid_argument("valuation must cover at least one source");
    if (valuation.prior.size() != m || valuation.scores.size() != m ||
        static_cast<Eigen::Index>(valuation.source_ids.size()) != m)
        throw std::invalid_argument("valuation fields must have equal length");
    if (!(valuation.tau > 0))
        throw std::invalid_argument(msg("tau must be > 0, got ", valuation.tau));
    for (Eigen::Index i = 0; i < m; ++i) {
        if (valuation.prior(i) < 0 || valuation.posterior(i) < 0)
            throw std::invalid_argument(msg("negative probability at index ", i));
        if (!std::isfinite(valuation.scores(i)))
            throw std::invalid_argument(msg("non-finite score at index ", i));
    }
    if (std::abs(valuation.prior.sum() - 1.0) > tol)
        throw std::invalid_argument(msg("prior sums to ", valuation.prior.sum(), ", expected 1"));
    if (std::abs(valuation.posterior.sum() - 1.0) > tol)
        throw std::invalid_argument(
            msg("posterior sums to ", valuation.posterior.sum(), ", expected 1"));
}

Vector uniform_prior(Eigen::Index count) {
    if (count < 1) throw std::invalid_argument("prior needs at least one source");
    return Vector::Constant(count, 1.0 / static_cast<double>(count));
}

Valuation uniform_valuation(std::vector<std::string> source_ids) {
    const auto m = static_cast<Eigen::Index>(source_ids.size());
    Valuation v;
    v.source_ids = std::move(source_ids);
    v.prior = uniform_prior(m);
    v.scores = Vector::Zero(m);
    v.tau = 1.0;
    v.posterior = v.prior;
    return v;
}

ReferenceMode parse_reference_mode(const std::string& name) {
    if (name == "labeled") return ReferenceMode::labeled;
    if (name == "unlabeled" || name == "unlabeled_energy") return ReferenceMode::unlabeled_energy;
    if (name == "union" || name == "union_of_sources") return ReferenceMode::union_of_sources;
    throw std::invalid_argument(msg("unknown reference mode '", name, "'"));
}

ValuationRecipe annotator_recipe(Measure measure, ReferenceMode mode) {
    ValuationRecipe recipe{PhiKind::train_small_model, VarphiKind::reference_set, measure, mode};
    validate(recipe);
    return recipe;
}

ValuationRecipe augmentation_recipe(Measure measure) {
    ValuationRecipe recipe{PhiKind::universal_model, VarphiKind::sample_set, measure,
                           ReferenceMode::labeled};
    validate(recipe);
    return recipe;
}

void validate(const ValuationRecipe& recipe) {
    if (recipe.reference_mode == ReferenceMode::unlabeled_energy &&
        recipe.measure != Measure::etran_energy)
        throw std::invalid_argument(
            "an unlabeled reference requires the label-free etran_energy measure");
}

double quick_tau(int source_count) {
    if (source_count < 2)
        throw std::invalid_argument(
            msg("quick_tau requires at least 2 sources, got ", source_count,
                " (a single source is trivially the point mass)"));
    return 1.0 / std::log2(static_cast<double>(source_count));
}

double resolve_tau(const std::optional<double>& explicit_tau, Eigen::Index source_count) {
    if (explicit_tau) {
        if (!(*explicit_tau > 0))
            throw std::invalid_argument(msg("tau must be > 0, got ", *explicit_tau));
        return *explicit_tau;
    }
    if (source_count < 2) return 1.0;  // point mass regardless of temperature
    return quick_tau(static_cast<int>(source_count));
}

Valuation gbv_posterior(Vector prior, Vector scores, double tau,
                        std::vector<std::string> source_ids) {
    const auto m = prior.size();
    if (m < 1) throw std::invalid_argument("prior must be nonempty");
    if (scores.size() != m)
        throw std::invalid_argument(
            msg("scores length ", scores.size(), " does not match prior length ", m));
    if (!(tau > 0)) throw std::invalid_argument(msg("tau must be > 0, got ", tau));
    for (Eigen::Index i = 0; i < m; ++i) {
        if (prior(i) < 0)
            throw std::invalid_argument(msg("prior entry ", i, " is negative"));
        if (!std::isfinite(scores(i)))
            throw std::invalid_argument(msg("score ", i, " is not finite"));
    }
    if (std::abs(prior.sum() - 1.0) > 1e-6)
        throw std::invalid_argument(msg("prior sums to ", prior.sum(), ", expected 1"));
    if (source_ids.empty()) {
        source_ids.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) source_ids.push_back(std::to_string(i));
    } else if (static_cast<Eigen::Index>(source_ids.size()) != m) {
        throw std::invalid_argument(msg("source id count ", source_ids.size(),
                                        " does not match prior length ", m));
    }

    // max-subtraction over supported entries only: a huge score behind a
    // zero prior must not poison the normalization
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i)
        if (prior(i) > 0) shift = std::max(shift, scores(i) / tau);
    Vector posterior = Vector::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i)
        if (prior(i) > 0) posterior(i) = prior(i) * std::exp(scores(i) / tau - shift);
    const double total = posterior.sum();
    if (!(total > 0)) throw std::invalid_argument("posterior normalization is degenerate");
    posterior /= total;

    Valuation out;
    out.source_ids = std::move(source_ids);
    out.prior = std::move(prior);
    out.scores = std::move(scores);
    out.tau = tau;
    out.posterior = std::move(posterior);
    return out;
}

Dataset build_reference(const SourceCollection& sources,
                        const std::optional<Dataset>& reference, ReferenceMode mode) {
    switch (mode) {
        case ReferenceMode::labeled:
            if (!reference)
                throw std::invalid_argument("labeled mode requires a reference dataset");
            return *reference;
        case ReferenceMode::unlabeled_energy:
            if (!reference)
                throw std::invalid_argument("unlabeled mode requires a reference dataset");
            return reference->without_labels();
        case ReferenceMode::union_of_sources: {
            Eigen::Index total = 0;
            for (const auto& [id, ds] : sources.sources()) total += ds.size();
            Matrix features(total, sources.dim());
            Labels labels;
            labels.reserve(static_cast<std::size_t>(total));
            Eigen::Index at = 0;
            for (const auto& [id, ds] : sources.sources()) {
                features.middleRows(at, ds.size()) = ds.features();
                labels.insert(labels.end(), ds.labels().begin(), ds.labels().end());
                at += ds.size();
            }
            return Dataset(std::move(features), std::move(labels), sources.num_classes());
        }
    }
    throw std::logic_error("unreachable");
}

namespace {

void require_labels(const Dataset& target, Measure measure) {
    if (!target.labels_usable())
        throw std::invalid_argument(msg("labels unavailable: measure ", measure_name(measure),
                                        " needs a labeled target set"));
}

}  // namespace

double transfer_score(Measure measure, const Model& model, const Dataset& source_data,
                      const Dataset& target, const TransferOptions& options) {
    switch (measure) {
        case Measure::leep: {
            require_labels(target, measure);
            return leep(predict_proba(model, target.features()), target.labels(),
                        target.num_classes())
                .value;
        }
        case Measure::logme: {
            require_labels(target, measure);
            return logme(extract_features(model, target.features()), target.labels(),
                         target.num_classes())
                .value;
        }
        case Measure::etran_energy:
            return etran_energy(extract_features(model, target.features())).value;
        case Measure::neg_mmd:
        case Measure::cond_neg_mmd: {
            const bool conditional = measure == Measure::cond_neg_mmd;
            if (conditional) require_labels(target, measure);
            Matrix sample = source_data.features();
            Matrix reference = target.features();
            if (options.mmd_on_probe_features) {
                const Model* probe = options.probe ? options.probe : &model;
                sample = extract_features(*probe, sample);
                reference = extract_features(*probe, reference);
            }
            return neg_mmd(sample, reference, options.kernel, conditional,
                           conditional ? &source_data.labels() : nullptr,
                           conditional ? &target.labels() : nullptr)
                .value;
        }
    }
    throw std::logic_error("unreachable");
}

std::vector<SourceScore> annotator_scores(const SourceCollection& sources,
                                          const Dataset& reference,
                                          const ValuationRecipe& recipe,
                                          const TrainConfig& train_config,
                                          const TransferOptions& options) {
    validate(recipe);
    if (recipe.phi != PhiKind::train_small_model)
        throw std::invalid_argument("annotator valuation requires the train_small_model recipe");
    if (reference.size() < 1) throw std::invalid_argument("reference set is empty");
    const bool raw_mmd = (recipe.measure == Measure::neg_mmd ||
                          recipe.measure == Measure::cond_neg_mmd) &&
                         !options.mmd_on_probe_features;

    TransferOptions resolved = options;
    std::optional<Model> trained_probe;
    if (options.mmd_on_probe_features && options.probe == nullptr) {
        require_labels(reference, recipe.measure);
        trained_probe = train(reference, train_config);
        resolved.probe = &*trained_probe;
    }

    std::vector<SourceScore> out;
    out.reserve(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto start = std::chrono::steady_clock::now();
        SourceScore entry;
        entry.id = sources.id(s);
        if (raw_mmd) {
            Model unused{Matrix::Zero(sources.dim(), sources.num_classes()),
                         Vector::Zero(sources.num_classes())};
            entry.score = transfer_score(recipe.measure, unused, sources.dataset(s), reference,
                                         resolved);
        } else {
            entry.model = train(sources.dataset(s), train_config);
            entry.score = transfer_score(recipe.measure, *entry.model, sources.dataset(s),
                                         reference, resolved);
        }
        entry.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(entry));
    }
    return out;
}

Valuation annotator_valuation(const SourceCollection& sources, const Dataset& reference,
                              const ValuationRecipe& recipe, const Vector& prior,
                              const std::optional<double>& tau,
                              const TrainConfig& train_config,
                              const TransferOptions& options) {
    const auto per_source = annotator_scores(sources, reference, recipe, train_config, options);
    Vector scores(static_cast<Eigen::Index>(per_source.size()));
    for (std::size_t i = 0; i < per_source.size(); ++i)
        scores(static_cast<Eigen::Index>(i)) = per_source[i].score;
    const double resolved = resolve_tau(tau, scores.size());
    return gbv_posterior(prior, std::move(scores), resolved, sources.ids());
}

Valuation augmentation_valuation(const Dataset& train_set,
                                 const std::vector<Augmentor>& augmentors,
                                 const Model& universal_model, Measure measure,
                                 const Vector& prior, const std::optional<double>& tau,
                                 std::uint64_t seed, const TransferOptions& options) {
    if (augmentors.empty()) throw std::invalid_argument("augmentor set is empty");
    if (universal_model.dim() != train_set.dim())
        throw std::invalid_argument(msg("universal model dim ", universal_model.dim(),
                                        " does not match training set dim ", train_set.dim()));
    Vector scores(static_cast<Eigen::Index>(augmentors.size()));
    std::vector<std::string> ids;
    ids.reserve(augmentors.size());
    const bool is_mmd = measure == Measure::neg_mmd || measure == Measure::cond_neg_mmd;
    for (std::size_t i = 0; i < augmentors.size(); ++i) {
        const Dataset transformed = apply(augmentors[i], train_set, mix_seed(seed, i));
        // the transformed set is the scoring target; the MMD variants
        // compare it back against the untransformed training set
        scores(static_cast<Eigen::Index>(i)) = transfer_score(
            measure, universal_model, transformed, is_mmd ? train_set : transformed, options);
        ids.push_back(augmentors[i].name());
    }
    const double resolved = resolve_tau(tau, scores.size());
    return gbv_posterior(prior, std::move(scores), resolved, std::move(ids));
}

}  // namespace distval
