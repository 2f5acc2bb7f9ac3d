#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "distval/valuation.hpp"
#include "../oracles/oracles.hpp"
#include "test_util.hpp"

using namespace distval;

namespace {

Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (const double x : values) v(i++) = x;
    return v;
}

}  // namespace

TEST_SUITE("valuation") {
    TEST_CASE("posterior matches the worked two-source example") {
        const auto v = gbv_posterior(vec({0.5, 0.5}), vec({0.0, std::log(3.0)}), 1.0);
        CHECK(v.posterior(0) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(v.posterior(1) == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(v.source_ids == std::vector<std::string>{"0", "1"});
        CHECK(v.tau == 1.0);
        validate(v);
    }

    TEST_CASE("equal scores return the prior") {
        std::mt19937_64 rng(211);
        for (int trial = 0; trial < 10; ++trial) {
            const auto m = Eigen::Index(2 + rng() % 9);
            const Vector prior = testutil::random_prob_vector(m, rng);
            const auto v = gbv_posterior(prior, Vector::Constant(m, -1.7), 0.4);
            for (Eigen::Index i = 0; i < m; ++i)
                CHECK(v.posterior(i) == doctest::Approx(prior(i)).epsilon(1e-12));
        }
    }

    TEST_CASE("score shifts leave the posterior unchanged") {
        std::mt19937_64 rng(223);
        const Vector prior = testutil::random_prob_vector(6, rng);
        Vector scores(6);
        for (Eigen::Index i = 0; i < 6; ++i)
            scores(i) = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        const auto base = gbv_posterior(prior, scores, 0.7);
        const auto shifted = gbv_posterior(prior, (scores.array() + 37.5).matrix(), 0.7);
        for (Eigen::Index i = 0; i < 6; ++i)
            CHECK(shifted.posterior(i) == doctest::Approx(base.posterior(i)).epsilon(1e-12));
    }

    TEST_CASE("posterior matches the direct Gibbs oracle") {
        std::mt19937_64 rng(227);
        std::uniform_real_distribution<double> score_dist(-2.0, 2.0);
        std::uniform_real_distribution<double> tau_dist(0.25, 2.0);
        for (int trial = 0; trial < 50; ++trial) {
            const auto m = Eigen::Index(2 + rng() % 9);
            const Vector prior = testutil::random_prob_vector(m, rng);
            Vector scores(m);
            for (Eigen::Index i = 0; i < m; ++i) scores(i) = score_dist(rng);
            const double tau = tau_dist(rng);
            const auto got = gbv_posterior(prior, scores, tau);
            const Vector want = oracles::gibbs_posterior(prior, scores, tau);
            for (Eigen::Index i = 0; i < m; ++i)
                CHECK(got.posterior(i) == doctest::Approx(want(i)).epsilon(1e-12));
        }
    }

    TEST_CASE("posterior-to-prior ratios order like the scores") {
        std::mt19937_64 rng(229);
        std::uniform_int_distribution<int> level(0, 4);
        std::uniform_real_distribution<double> tau_dist(0.25, 2.0);
        for (int trial = 0; trial < 100; ++trial) {
            const auto m = Eigen::Index(3 + rng() % 8);
            const Vector prior = testutil::random_prob_vector(m, rng);
            Vector scores(m);
            // quantized scores so ties actually occur
            for (Eigen::Index i = 0; i < m; ++i) scores(i) = -1.0 + 0.5 * level(rng);
            const auto v = gbv_posterior(prior, scores, tau_dist(rng));
            const Vector ratio = v.posterior.array() / v.prior.array();
            for (Eigen::Index i = 0; i < m; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (scores(i) > scores(j)) {
                        CHECK(ratio(i) > ratio(j));
                    } else if (scores(i) == scores(j)) {
                        CHECK(ratio(i) == doctest::Approx(ratio(j)).epsilon(1e-12));
                    }
                }
            }
        }
    }

    TEST_CASE("extreme temperatures recover the prior and the argmax") {
        const Vector prior = vec({0.1, 0.2, 0.3, 0.4});
        const Vector scores = vec({0.9, -0.4, 0.1, 0.3});
        const auto flat = gbv_posterior(prior, scores, 1e9);
        for (Eigen::Index i = 0; i < 4; ++i)
            CHECK(flat.posterior(i) == doctest::Approx(prior(i)).epsilon(1e-6));

        const auto peaked = gbv_posterior(prior, scores, 1e-3);
        CHECK(peaked.posterior(0) >= 1.0 - 1e-6);

        // a tied maximum splits in proportion to the prior
        const auto tied = gbv_posterior(prior, vec({0.9, -0.4, 0.9, 0.3}), 1e-3);
        CHECK(tied.posterior(0) == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(tied.posterior(2) == doctest::Approx(0.75).epsilon(1e-9));
    }

    TEST_CASE("zero-prior sources stay at exactly zero") {
        const auto v = gbv_posterior(vec({0.5, 0.5, 0.0}), vec({0.1, -0.3, 1e15}), 1.0);
        CHECK(v.posterior(2) == 0.0);
        const Vector two = oracles::gibbs_posterior(vec({0.5, 0.5}), vec({0.1, -0.3}), 1.0);
        CHECK(v.posterior(0) == doctest::Approx(two(0)).epsilon(1e-12));
        CHECK(v.posterior(1) == doctest::Approx(two(1)).epsilon(1e-12));
    }

    TEST_CASE("posterior input validation") {
        const Vector prior = vec({0.5, 0.5});
        const Vector scores = vec({0.0, 1.0});
        CHECK_THROWS_AS(gbv_posterior(prior, scores, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(gbv_posterior(prior, scores, -1.0), std::invalid_argument);
        CHECK_THROWS_WITH_AS(gbv_posterior(vec({0.4, 0.5}), scores, 1.0),
                             doctest::Contains("sums to"), std::invalid_argument);
        CHECK_THROWS_AS(gbv_posterior(vec({1.2, -0.2}), scores, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(
            gbv_posterior(prior, vec({0.0, std::numeric_limits<double>::quiet_NaN()}), 1.0),
            std::invalid_argument);
        CHECK_THROWS_AS(
            gbv_posterior(prior, vec({0.0, std::numeric_limits<double>::infinity()}), 1.0),
            std::invalid_argument);
        CHECK_THROWS_AS(gbv_posterior(Vector(), Vector(), 1.0), std::invalid_argument);
        CHECK_THROWS_AS(gbv_posterior(prior, vec({1.0}), 1.0), std::invalid_argument);
        CHECK_THROWS_AS(gbv_posterior(prior, scores, 1.0, {"only"}), std::invalid_argument);
    }

    TEST_CASE("quick_tau matches the tabulated values") {
        CHECK(std::abs(quick_tau(5) - 0.4307) <= 1e-4);
        CHECK(std::abs(quick_tau(3) - 0.6309) <= 1e-4);
        CHECK(quick_tau(2) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(quick_tau(68) - 0.1643) <= 1e-4);
        CHECK(quick_tau(5) == 1.0 / std::log2(5.0));
        CHECK_THROWS_AS(quick_tau(1), std::invalid_argument);
        CHECK_THROWS_AS(quick_tau(0), std::invalid_argument);
    }

    TEST_CASE("resolve_tau prefers the explicit temperature") {
        CHECK(resolve_tau(0.3, 5) == 0.3);
        CHECK(resolve_tau(0.3, 1) == 0.3);
        CHECK(resolve_tau(std::nullopt, 5) == quick_tau(5));
        CHECK(resolve_tau(std::nullopt, 1) == 1.0);
        CHECK_THROWS_AS(resolve_tau(-0.5, 5), std::invalid_argument);
        CHECK_THROWS_AS(resolve_tau(0.0, 5), std::invalid_argument);
    }

    TEST_CASE("uniform helpers and valuation validation") {
        const Vector p = uniform_prior(4);
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(p(i) == 0.25);
        CHECK_THROWS_AS(uniform_prior(0), std::invalid_argument);

        auto v = uniform_valuation({"a", "b"});
        CHECK(v.size() == 2);
        CHECK(v.posterior(0) == 0.5);
        validate(v);
        v.posterior(0) = 0.9;
        CHECK_THROWS_WITH_AS(validate(v), doctest::Contains("posterior sums to"),
                             std::invalid_argument);
    }

    TEST_CASE("identical sources value equally") {
        std::mt19937_64 rng(233);
        const Dataset data = testutil::structured_dataset(30, 4, 3, rng);
        const Dataset reference = testutil::structured_dataset(24, 4, 3, rng);
        const SourceCollection sources({{"a", data}, {"b", data}});
        const TrainConfig cfg{0.2, 120, 1e-4, 0};
        const auto v = annotator_valuation(sources, reference, annotator_recipe(Measure::leep),
                                           uniform_prior(2), std::nullopt, cfg);
        CHECK(v.posterior(0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(v.posterior(1) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(v.source_ids == std::vector<std::string>{"a", "b"});

        const SourceCollection lone({{"only", data}});
        const auto point = annotator_valuation(lone, reference, annotator_recipe(Measure::leep),
                                               uniform_prior(1), std::nullopt, cfg);
        CHECK(point.posterior(0) == 1.0);
        CHECK(point.tau == 1.0);
    }

    TEST_CASE("build_reference resolves each mode") {
        std::mt19937_64 rng(239);
        const Dataset a = testutil::structured_dataset(6, 3, 2, rng);
        const Dataset b = testutil::structured_dataset(4, 3, 2, rng);
        const Dataset ref = testutil::structured_dataset(5, 3, 2, rng);
        const SourceCollection sources({{"a", a}, {"b", b}});

        const Dataset labeled = build_reference(sources, ref, ReferenceMode::labeled);
        CHECK(labeled == ref);

        const Dataset unlabeled = build_reference(sources, ref, ReferenceMode::unlabeled_energy);
        CHECK_FALSE(unlabeled.labels_usable());
        CHECK(unlabeled.features() == ref.features());

        const Dataset merged = build_reference(sources, std::nullopt,
                                               ReferenceMode::union_of_sources);
        CHECK(merged.size() == 10);
        CHECK(merged.labels_usable());
        CHECK(merged.features().topRows(6) == a.features());
        CHECK(merged.features().bottomRows(4) == b.features());
        for (int i = 0; i < 4; ++i)
            CHECK(merged.labels()[static_cast<std::size_t>(6 + i)] ==
                  b.labels()[static_cast<std::size_t>(i)]);

        CHECK_THROWS_AS(build_reference(sources, std::nullopt, ReferenceMode::labeled),
                        std::invalid_argument);
    }

    TEST_CASE("label-needing measures reject an unlabeled target") {
        std::mt19937_64 rng(241);
        const Dataset data = testutil::structured_dataset(12, 3, 2, rng);
        const Model model = train(data, TrainConfig{0.2, 50, 1e-4, 0});
        const Dataset stripped = data.without_labels();
        CHECK_THROWS_WITH_AS(transfer_score(Measure::leep, model, data, stripped),
                             doctest::Contains("labels unavailable"), std::invalid_argument);
        CHECK_THROWS_AS(transfer_score(Measure::logme, model, data, stripped),
                        std::invalid_argument);
        CHECK_THROWS_AS(transfer_score(Measure::cond_neg_mmd, model, data, stripped),
                        std::invalid_argument);
        CHECK_NOTHROW(transfer_score(Measure::etran_energy, model, data, stripped));
        CHECK_NOTHROW(transfer_score(Measure::neg_mmd, model, data, stripped));
    }

    TEST_CASE("duplicate identity augmentors split the posterior evenly") {
        std::mt19937_64 rng(251);
        const Dataset train_set = testutil::structured_dataset(30, 4, 3, rng);
        const Model universal = train(train_set, TrainConfig{0.2, 80, 1e-4, 0});
        const std::vector<Augmentor> augs{{AugmentOp::identity, 0.0},
                                          {AugmentOp::identity, 0.0}};
        const auto v = augmentation_valuation(train_set, augs, universal, Measure::leep,
                                              uniform_prior(2), std::nullopt, 7);
        CHECK(v.posterior(0) == 0.5);
        CHECK(v.posterior(1) == 0.5);
        CHECK(v.source_ids == std::vector<std::string>{"identity", "identity"});
    }

    TEST_CASE("augmentation scores equal direct scoring of the transformed sets") {
        std::mt19937_64 rng(257);
        const Dataset train_set = testutil::structured_dataset(40, 4, 3, rng);
        const Model universal = train(train_set, TrainConfig{0.2, 80, 1e-4, 0});
        const std::vector<Augmentor> augs{{AugmentOp::identity, 0.0},
                                          {AugmentOp::add_gaussian_noise, 1.5},
                                          {AugmentOp::scale, 2.0}};
        const std::uint64_t seed = 42;

        const auto via_leep = augmentation_valuation(train_set, augs, universal, Measure::leep,
                                                     uniform_prior(3), 0.7, seed);
        CHECK(via_leep.tau == 0.7);
        for (std::size_t i = 0; i < augs.size(); ++i) {
            const Dataset transformed = apply(augs[i], train_set, mix_seed(seed, i));
            const double want = transfer_score(Measure::leep, universal, transformed, transformed);
            CHECK(via_leep.scores(static_cast<Eigen::Index>(i)) == want);
        }

        const auto via_mmd = augmentation_valuation(train_set, augs, universal, Measure::neg_mmd,
                                                    uniform_prior(3), 0.7, seed);
        for (std::size_t i = 0; i < augs.size(); ++i) {
            const Dataset transformed = apply(augs[i], train_set, mix_seed(seed, i));
            const double want = transfer_score(Measure::neg_mmd, universal, transformed,
                                               train_set);
            CHECK(via_mmd.scores(static_cast<Eigen::Index>(i)) == want);
        }
    }

    TEST_CASE("recipe and reference mode plumbing") {
        CHECK_THROWS_AS(annotator_recipe(Measure::leep, ReferenceMode::unlabeled_energy),
                        std::invalid_argument);
        const auto ok = annotator_recipe(Measure::etran_energy, ReferenceMode::unlabeled_energy);
        CHECK(ok.phi == PhiKind::train_small_model);
        CHECK(augmentation_recipe(Measure::leep).phi == PhiKind::universal_model);

        CHECK(parse_reference_mode("labeled") == ReferenceMode::labeled);
        CHECK(parse_reference_mode("unlabeled") == ReferenceMode::unlabeled_energy);
        CHECK(parse_reference_mode("union") == ReferenceMode::union_of_sources);
        CHECK(parse_reference_mode("union_of_sources") == ReferenceMode::union_of_sources);
        CHECK_THROWS_AS(parse_reference_mode("holdout"), std::invalid_argument);
    }
}
