#include "distval/continual.hpp"

namespace distval {

std::vector<std::string> StreamStep::ids() const {
    std::vector<std::string> out;
    out.reserve(per_source.size());
    for (const auto& [id, ds] : per_source) out.push_back(id);
    return out;
}

void validate(const StreamStep& step) {
    if (step.step_index < 1)
        throw std::invalid_argument(msg("step index must be >= 1, got ", step.step_index));
    if (step.per_source.empty())
        throw std::invalid_argument("stream step covers no sources");
}

VectorStreamFeed::VectorStreamFeed(std::vector<StreamStep> steps) : steps_(std::move(steps)) {}

std::optional<StreamStep> VectorStreamFeed::next() {
    if (at_ >= steps_.size()) return std::nullopt;
    StreamStep step = std::move(steps_[at_]);
    steps_[at_] = StreamStep{};  // release the data as soon as it is handed out
    ++at_;
    return step;
}

Valuation cgbv_update(const Valuation& previous, const Vector& step_scores, double tau) {
    validate(previous);
    if (step_scores.size() != previous.size())
        throw std::invalid_argument(msg("step scores cover ", step_scores.size(),
                                        " sources, expected ", previous.size()));
    return gbv_posterior(previous.posterior, step_scores, tau, previous.source_ids);
}

PosteriorTrajectory run_stream(StreamFeed& stream, const Dataset& reference,
                               const ValuationRecipe& recipe, const Vector& prior,
                               const std::optional<double>& tau,
                               const TrainConfig& train_config,
                               const TransferOptions& options) {
    PosteriorTrajectory trajectory;
    std::vector<std::string> ids;
    double resolved_tau = 1.0;
    while (auto step = stream.next()) {
        validate(*step);
        if (trajectory.posteriors.empty()) {
            ids = step->ids();
            resolved_tau = resolve_tau(tau, static_cast<Eigen::Index>(ids.size()));
            Valuation initial;
            initial.source_ids = ids;
            initial.prior = prior;
            initial.scores = Vector::Zero(prior.size());
            initial.tau = resolved_tau;
            initial.posterior = prior;
            validate(initial);
            trajectory.posteriors.push_back(std::move(initial));
        } else if (step->ids() != ids) {
            throw std::invalid_argument(
                msg("step ", step->step_index, " covers a different source id set"));
        }
        SourceCollection step_sources(std::move(step->per_source));
        const auto scored =
            annotator_scores(step_sources, reference, recipe, train_config, options);
        Vector scores(static_cast<Eigen::Index>(scored.size()));
        for (std::size_t i = 0; i < scored.size(); ++i)
            scores(static_cast<Eigen::Index>(i)) = scored[i].score;
        trajectory.posteriors.push_back(
            cgbv_update(trajectory.posteriors.back(), scores, resolved_tau));
    }
    if (trajectory.posteriors.empty())
        throw std::invalid_argument("stream produced no steps");
    return trajectory;
}

Valuation baseline_no_update(const PosteriorTrajectory& trajectory) {
    if (trajectory.steps() < 1)
        throw std::invalid_argument("trajectory has no computed steps");
    return trajectory.at(1);
}

Valuation baseline_average(const PosteriorTrajectory& trajectory, int t) {
    if (trajectory.steps() < 1)
        throw std::invalid_argument("trajectory has no computed steps");
    if (t < 1 || t > trajectory.steps())
        throw std::invalid_argument(msg("step ", t, " outside the computed range [1, ",
                                        trajectory.steps(), "]"));
    Vector mean = Vector::Zero(trajectory.at(1).size());
    for (int i = 1; i <= t; ++i) mean += trajectory.at(i).posterior;
    mean /= static_cast<double>(t);
    mean /= mean.sum();  // defensive renormalization

    Valuation out = trajectory.at(t);
    out.posterior = std::move(mean);
    return out;
}

}  // namespace distval
