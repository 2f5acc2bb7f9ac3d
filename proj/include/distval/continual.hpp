#ifndef DISTVAL_CONTINUAL_HPP
#define DISTVAL_CONTINUAL_HPP

#include <optional>

#include "distval/valuation.hpp"

namespace distval {

/// One step of a per-source data stream. Every step of a stream covers the
/// same source ids in the same order. The noise fields are metadata filled
/// in by generators; they are not consumed by the valuation path.
struct StreamStep {
    int step_index = 1;
    std::vector<std::pair<std::string, Dataset>> per_source;
    std::vector<double> epsilons;       // noise level assigned per source
    std::vector<int> noise_permutation; // permutation that produced it

    std::vector<std::string> ids() const;
};

void validate(const StreamStep& step);

/// Hands out stream steps one at a time. The valuation path may read each
/// step exactly once and can never reach back to an earlier one.
class StreamFeed {
public:
    virtual ~StreamFeed() = default;
    virtual std::optional<StreamStep> next() = 0;
};

/// Feed over a pre-built step sequence; steps are moved out as consumed.
class VectorStreamFeed final : public StreamFeed {
public:
    explicit VectorStreamFeed(std::vector<StreamStep> steps);
    std::optional<StreamStep> next() override;

private:
    std::vector<StreamStep> steps_;
    std::size_t at_ = 0;
};

/// Posterior sequence P_0 ... P_T; P_0 is the prior.
struct PosteriorTrajectory {
    std::vector<Valuation> posteriors;

    int steps() const { return static_cast<int>(posteriors.size()) - 1; }
    const Valuation& at(int t) const { return posteriors.at(static_cast<std::size_t>(t)); }
};

/// One recursive posterior update: P_t proportional to
/// P_{t-1} * exp(step_scores / tau).
Valuation cgbv_update(const Valuation& previous, const Vector& step_scores, double tau);

/// Folds a stream into a posterior trajectory. Each step's scores come
/// from models freshly trained on that step's data alone; the trajectory
/// retains scores and posteriors, never the data.
PosteriorTrajectory run_stream(StreamFeed& stream, const Dataset& reference,
                               const ValuationRecipe& recipe, const Vector& prior,
                               const std::optional<double>& tau,
                               const TrainConfig& train_config,
                               const TransferOptions& options = {});

/// Uses only the first computed posterior P_1.
Valuation baseline_no_update(const PosteriorTrajectory& trajectory);

/// Mean of P_1 ... P_t, renormalized.
Valuation baseline_average(const PosteriorTrajectory& trajectory, int t);

}  // namespace distval

#endif
