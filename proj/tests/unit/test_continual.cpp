#include <doctest.h>

#include <algorithm>
#include <random>

#include "distval/continual.hpp"
#include "../oracles/oracles.hpp"
#include "test_util.hpp"

using namespace distval;

namespace {

Valuation start_from(Vector prior) {
    const auto m = prior.size();
    Valuation v;
    for (Eigen::Index i = 0; i < m; ++i) v.source_ids.push_back(std::to_string(i));
    v.prior = prior;
    v.scores = Vector::Zero(m);
    v.tau = 1.0;
    v.posterior = std::move(prior);
    return v;
}

Vector random_scores(Eigen::Index m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Vector s(m);
    for (Eigen::Index i = 0; i < m; ++i) s(i) = dist(rng);
    return s;
}

}  // namespace

TEST_SUITE("continual") {
    TEST_CASE("one update equals the one-shot posterior") {
        std::mt19937_64 rng(301);
        const Vector prior = testutil::random_prob_vector(4, rng);
        const Vector scores = random_scores(4, rng);
        const auto folded = cgbv_update(start_from(prior), scores, 0.6);
        const auto direct = gbv_posterior(prior, scores, 0.6);
        for (Eigen::Index i = 0; i < 4; ++i)
            CHECK(folded.posterior(i) == doctest::Approx(direct.posterior(i)).epsilon(1e-12));
    }

    TEST_CASE("two folded updates equal the batch posterior on summed scores") {
        std::mt19937_64 rng(307);
        const Vector prior = testutil::random_prob_vector(5, rng);
        const Vector s1 = random_scores(5, rng);
        const Vector s2 = random_scores(5, rng);
        const double tau = 0.8;
        const auto folded = cgbv_update(cgbv_update(start_from(prior), s1, tau), s2, tau);
        const auto batch = gbv_posterior(prior, s1 + s2, tau);
        for (Eigen::Index i = 0; i < 5; ++i)
            CHECK(folded.posterior(i) == doctest::Approx(batch.posterior(i)).epsilon(1e-12));
    }

    TEST_CASE("equal step scores leave the posterior unchanged") {
        std::mt19937_64 rng(311);
        const Vector prior = testutil::random_prob_vector(6, rng);
        auto state = cgbv_update(start_from(prior), random_scores(6, rng), 0.5);
        const Vector before = state.posterior;
        state = cgbv_update(state, Vector::Constant(6, 0.37), 0.5);
        for (Eigen::Index i = 0; i < 6; ++i)
            CHECK(state.posterior(i) == doctest::Approx(before(i)).epsilon(1e-12));
    }

    TEST_CASE("folding matches the batch posterior and ignores step order") {
        std::mt19937_64 rng(313);
        std::uniform_real_distribution<double> tau_dist(0.25, 2.0);
        for (int trial = 0; trial < 30; ++trial) {
            const auto m = Eigen::Index(2 + rng() % 9);
            const int steps = 1 + static_cast<int>(rng() % 16);
            const double tau = tau_dist(rng);
            const Vector prior = testutil::random_prob_vector(m, rng);

            std::vector<Vector> step_scores;
            Vector total = Vector::Zero(m);
            for (int t = 0; t < steps; ++t) {
                step_scores.push_back(random_scores(m, rng));
                total += step_scores.back();
            }

            auto fold = start_from(prior);
            for (const auto& s : step_scores) fold = cgbv_update(fold, s, tau);
            const auto batch = gbv_posterior(prior, total, tau);
            for (Eigen::Index i = 0; i < m; ++i)
                CHECK(std::abs(fold.posterior(i) - batch.posterior(i)) <=
                      1e-10 * batch.posterior(i));

            std::shuffle(step_scores.begin(), step_scores.end(), rng);
            auto refold = start_from(prior);
            for (const auto& s : step_scores) refold = cgbv_update(refold, s, tau);
            for (Eigen::Index i = 0; i < m; ++i)
                CHECK(std::abs(refold.posterior(i) - fold.posterior(i)) <=
                      1e-10 * fold.posterior(i));
        }
    }

    TEST_CASE("update validates its inputs") {
        std::mt19937_64 rng(317);
        const auto state = start_from(testutil::random_prob_vector(3, rng));
        CHECK_THROWS_AS(cgbv_update(state, Vector::Zero(2), 1.0), std::invalid_argument);
        CHECK_THROWS_AS(cgbv_update(state, Vector::Zero(3), 0.0), std::invalid_argument);
        Valuation broken = state;
        broken.posterior(0) += 0.5;
        CHECK_THROWS_AS(cgbv_update(broken, Vector::Zero(3), 1.0), std::invalid_argument);
    }

    TEST_CASE("vector feeds hand each step out exactly once") {
        std::mt19937_64 rng(321);
        StreamStep one;
        one.step_index = 1;
        one.per_source.emplace_back("a", testutil::random_dataset(4, 2, 2, rng));
        StreamStep two;
        two.step_index = 2;
        two.per_source.emplace_back("a", testutil::random_dataset(5, 2, 2, rng));

        VectorStreamFeed feed({one, two});
        const auto first = feed.next();
        REQUIRE(first.has_value());
        CHECK(first->step_index == 1);
        CHECK(first->per_source.at(0).second.size() == 4);
        const auto second = feed.next();
        REQUIRE(second.has_value());
        CHECK(second->step_index == 2);
        CHECK(second->per_source.at(0).second.size() == 5);
        CHECK_FALSE(feed.next().has_value());
        CHECK_FALSE(feed.next().has_value());
    }

    TEST_CASE("run_stream folds a feed into a trajectory") {
        std::mt19937_64 rng(331);
        const Dataset reference = testutil::structured_dataset(20, 3, 2, rng);
        std::vector<StreamStep> steps;
        for (int t = 1; t <= 3; ++t) {
            StreamStep step;
            step.step_index = t;
            step.per_source.emplace_back("a", testutil::structured_dataset(12, 3, 2, rng));
            step.per_source.emplace_back("b", testutil::structured_dataset(12, 3, 2, rng));
            steps.push_back(std::move(step));
        }
        VectorStreamFeed feed(std::move(steps));
        const TrainConfig cfg{0.2, 60, 1e-4, 0};
        const auto trajectory = run_stream(feed, reference, annotator_recipe(Measure::leep),
                                           uniform_prior(2), 0.5, cfg);
        CHECK(trajectory.steps() == 3);
        CHECK(trajectory.at(0).posterior(0) == 0.5);
        CHECK(trajectory.at(0).scores(1) == 0.0);
        for (int t = 0; t <= 3; ++t) {
            validate(trajectory.at(t));
            CHECK(trajectory.at(t).tau == 0.5);
            CHECK(trajectory.at(t).source_ids == std::vector<std::string>{"a", "b"});
        }
    }

    TEST_CASE("run_stream rejects inconsistent or empty feeds") {
        std::mt19937_64 rng(337);
        const Dataset reference = testutil::structured_dataset(16, 3, 2, rng);
        const TrainConfig cfg{0.2, 40, 1e-4, 0};

        StreamStep first;
        first.step_index = 1;
        first.per_source.emplace_back("a", testutil::structured_dataset(10, 3, 2, rng));
        StreamStep renamed;
        renamed.step_index = 2;
        renamed.per_source.emplace_back("z", testutil::structured_dataset(10, 3, 2, rng));
        VectorStreamFeed bad({first, renamed});
        CHECK_THROWS_WITH_AS(run_stream(bad, reference, annotator_recipe(Measure::leep),
                                        uniform_prior(1), 0.5, cfg),
                             doctest::Contains("different source id set"), std::invalid_argument);

        VectorStreamFeed empty({});
        CHECK_THROWS_WITH_AS(run_stream(empty, reference, annotator_recipe(Measure::leep),
                                        uniform_prior(1), 0.5, cfg),
                             doctest::Contains("no steps"), std::invalid_argument);
    }

    TEST_CASE("baselines summarize the trajectory") {
        PosteriorTrajectory trajectory;
        auto push = [&trajectory](double p0, double p1) {
            Valuation v;
            v.source_ids = {"a", "b"};
            v.prior = uniform_prior(2);
            v.scores = Vector::Zero(2);
            v.tau = 1.0;
            v.posterior = Vector(2);
            v.posterior << p0, p1;
            trajectory.posteriors.push_back(std::move(v));
        };
        push(0.5, 0.5);  // P_0
        push(0.2, 0.8);
        push(0.6, 0.4);

        const auto held = baseline_no_update(trajectory);
        CHECK(held.posterior(0) == 0.2);
        CHECK(held.posterior(1) == 0.8);

        const auto averaged = baseline_average(trajectory, 2);
        CHECK(averaged.posterior(0) == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(averaged.posterior(1) == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(averaged.posterior.sum() == doctest::Approx(1.0).epsilon(1e-12));

        const auto single = baseline_average(trajectory, 1);
        CHECK(single.posterior(0) == doctest::Approx(0.2).epsilon(1e-12));

        CHECK_THROWS_AS(baseline_average(trajectory, 0), std::invalid_argument);
        CHECK_THROWS_AS(baseline_average(trajectory, 3), std::invalid_argument);
        PosteriorTrajectory bare;
        push(0.5, 0.5);
        bare.posteriors.push_back(trajectory.posteriors.back());
        CHECK_THROWS_AS(baseline_no_update(bare), std::invalid_argument);
    }

    TEST_CASE("a consistently stronger source accumulates mass") {
        auto state = start_from(uniform_prior(2));
        Vector step(2);
        step << 0.5, -0.5;
        double previous = state.posterior(0);
        for (int t = 0; t < 3; ++t) {
            state = cgbv_update(state, step, 1.0);
            CHECK(state.posterior(0) > previous);
            previous = state.posterior(0);
        }
        CHECK(state.posterior(0) > 0.9);
    }
}
