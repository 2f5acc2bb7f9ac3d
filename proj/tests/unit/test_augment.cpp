#include <doctest.h>

#include <cmath>
#include <random>

#include "distval/augment.hpp"
#include "test_util.hpp"

using namespace distval;

TEST_SUITE("augment") {
    TEST_CASE("each operator transforms features as documented") {
        Matrix x(1, 2);
        x << 1.0, -3.0;

        CHECK(apply(Augmentor{AugmentOp::identity, 0.0}, x, 5) == x);
        CHECK(apply(Augmentor{AugmentOp::add_gaussian_noise, 0.0}, x, 5) == x);

        const Matrix doubled = apply(Augmentor{AugmentOp::scale, 2.0}, x, 5);
        CHECK(doubled(0, 0) == 2.0);
        CHECK(doubled(0, 1) == -6.0);
        CHECK(apply(Augmentor{AugmentOp::scale, 0.0}, x, 5) == Matrix::Zero(1, 2));

        Matrix unit(1, 2);
        unit << 1.0, 0.0;
        const Matrix turned = apply(Augmentor{AugmentOp::rotate_plane, 90.0}, unit, 5);
        CHECK(turned(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(turned(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

        CHECK(apply(Augmentor{AugmentOp::feature_dropout, 0.0}, x, 5) == x);
        CHECK(apply(Augmentor{AugmentOp::feature_dropout, 1.0}, x, 5) == Matrix::Zero(1, 2));

        CHECK_THROWS_AS(apply(Augmentor{AugmentOp::rotate_plane, 45.0}, Matrix::Zero(2, 1), 5),
                        std::invalid_argument);
        CHECK_THROWS_AS(apply(Augmentor{AugmentOp::rotate_plane, 45.0, 0, 7}, x, 5),
                        std::invalid_argument);
    }

    TEST_CASE("noise is deterministic per seed and varies across seeds") {
        std::mt19937_64 rng(401);
        const Matrix x = testutil::random_matrix(6, 3, rng);
        const Augmentor noise{AugmentOp::add_gaussian_noise, 0.8};
        const Matrix a = apply(noise, x, 9);
        const Matrix b = apply(noise, x, 9);
        const Matrix c = apply(noise, x, 10);
        CHECK(a == b);
        CHECK_FALSE(a == c);
        CHECK_FALSE(a == x);
    }

    TEST_CASE("rotation preserves the norm of the touched plane") {
        std::mt19937_64 rng(403);
        const Matrix x = testutil::random_matrix(5, 4, rng);
        const Matrix y = apply(Augmentor{AugmentOp::rotate_plane, 37.0, 1, 3}, x, 0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double before = x(i, 1) * x(i, 1) + x(i, 3) * x(i, 3);
            const double after = y(i, 1) * y(i, 1) + y(i, 3) * y(i, 3);
            CHECK(after == doctest::Approx(before).epsilon(1e-12));
            CHECK(y(i, 0) == x(i, 0));
            CHECK(y(i, 2) == x(i, 2));
        }
    }

    TEST_CASE("dataset augmentation leaves labels untouched") {
        std::mt19937_64 rng(409);
        const Dataset ds = testutil::random_dataset(8, 3, 2, rng);
        const Dataset noisy = apply(Augmentor{AugmentOp::add_gaussian_noise, 1.0}, ds, 3);
        CHECK(noisy.labels() == ds.labels());
        CHECK(noisy.num_classes() == ds.num_classes());
        CHECK(noisy.labels_usable());
        const Dataset stripped = apply(Augmentor{AugmentOp::scale, 2.0}, ds.without_labels(), 3);
        CHECK_FALSE(stripped.labels_usable());
    }

    TEST_CASE("magnitude validation per operator") {
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::identity, 0.1}), std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::add_gaussian_noise, -1.0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::scale, -0.5}), std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::rotate_plane, 200.0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::rotate_plane, 30.0, 1, 1}),
                        std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::rotate_plane, 30.0, -1, 1}),
                        std::invalid_argument);
        CHECK_THROWS_AS(validate(Augmentor{AugmentOp::feature_dropout, 1.5}),
                        std::invalid_argument);
        CHECK_NOTHROW(validate(Augmentor{AugmentOp::rotate_plane, -180.0}));
        CHECK_NOTHROW(validate(Augmentor{AugmentOp::rotate_plane, 180.0}));
        CHECK_NOTHROW(validate(Augmentor{AugmentOp::feature_dropout, 0.0}));
        CHECK_NOTHROW(validate(Augmentor{AugmentOp::feature_dropout, 1.0}));
        CHECK_NOTHROW(validate(Augmentor{AugmentOp::scale, 0.0}));
    }

    TEST_CASE("augmentor names read operator at magnitude") {
        CHECK(Augmentor{AugmentOp::identity, 0.0}.name() == "identity");
        CHECK(Augmentor{AugmentOp::add_gaussian_noise, 2.0}.name() == "add_gaussian_noise@2");
        CHECK(Augmentor{AugmentOp::scale, 1.25}.name() == "scale@1.25");
        for (const auto op : {AugmentOp::identity, AugmentOp::add_gaussian_noise,
                              AugmentOp::scale, AugmentOp::rotate_plane,
                              AugmentOp::feature_dropout})
            CHECK(parse_augment_op(augment_op_name(op)) == op);
        CHECK(parse_augment_op("gaussian_noise") == AugmentOp::add_gaussian_noise);
        CHECK(parse_augment_op("rotate") == AugmentOp::rotate_plane);
        CHECK(parse_augment_op("dropout") == AugmentOp::feature_dropout);
        CHECK_THROWS_AS(parse_augment_op("blur"), std::invalid_argument);
    }

    TEST_CASE("discretize spaces magnitudes linearly and validates them") {
        const auto grid = discretize(AugmentOp::add_gaussian_noise, 0.1, 5.0, 5);
        REQUIRE(grid.size() == 5);
        const double want[] = {0.1, 1.325, 2.55, 3.775, 5.0};
        for (int i = 0; i < 5; ++i)
            CHECK(grid[static_cast<std::size_t>(i)].magnitude ==
                  doctest::Approx(want[i]).epsilon(1e-12));
        CHECK(grid.front().magnitude == 0.1);
        CHECK(grid.back().magnitude == 5.0);

        const auto flat = discretize(AugmentOp::scale, 0.0, 0.0, 3);
        for (const auto& aug : flat) CHECK(aug.magnitude == 0.0);

        const auto mid = discretize(AugmentOp::add_gaussian_noise, 0.1, 5.0, 1);
        REQUIRE(mid.size() == 1);
        CHECK(mid[0].magnitude == doctest::Approx(2.55).epsilon(1e-12));

        CHECK_THROWS_AS(discretize(AugmentOp::scale, 2.0, 1.0, 3), std::invalid_argument);
        CHECK_THROWS_AS(discretize(AugmentOp::scale, 0.0, 1.0, 0), std::invalid_argument);
        CHECK_THROWS_AS(discretize(AugmentOp::feature_dropout, 0.5, 2.0, 3),
                        std::invalid_argument);
    }

    TEST_CASE("augmentor specs parse ranges and single magnitudes") {
        const auto augs = parse_augmentor_spec(R"([
            {"operator": "identity"},
            {"operator": "gaussian_noise", "range": [2.0, 10.0], "k": 5},
            {"operator": "scale", "magnitude": 1.5},
            {"operator": "rotate", "magnitude": 30.0, "axes": [0, 2]}
        ])");
        REQUIRE(augs.size() == 8);
        CHECK(augs[0].op == AugmentOp::identity);
        CHECK(augs[1].magnitude == 2.0);
        CHECK(augs[5].magnitude == 10.0);
        CHECK(augs[6].name() == "scale@1.5");
        CHECK(augs[7].axis_a == 0);
        CHECK(augs[7].axis_b == 2);

        const auto ranged = parse_augmentor_spec(
            R"([{"operator": "dropout", "range": [0.1, 0.5]}])");
        CHECK(ranged.size() == 5);  // k defaults to 5

        CHECK_THROWS_AS(parse_augmentor_spec(R"({"operator": "identity"})"),
                        std::runtime_error);
        CHECK_THROWS_AS(parse_augmentor_spec(R"([{"operator": "blur"}])"),
                        std::invalid_argument);
        CHECK_THROWS_AS(parse_augmentor_spec(R"([{"operator": "rotate", "axes": [1]}])"),
                        std::runtime_error);
        CHECK_THROWS_AS(parse_augmentor_spec("[]"), std::runtime_error);
    }

    TEST_CASE("sampling follows the posterior") {
        std::mt19937_64 rng(419);
        Vector point(3);
        point << 0.0, 1.0, 0.0;
        for (int i = 0; i < 50; ++i) CHECK(sample_index(point, rng) == 1);

        Vector half(2);
        half << 0.5, 0.5;
        int first = 0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i)
            if (sample_index(half, rng) == 0) ++first;
        CHECK(std::abs(first / static_cast<double>(draws) - 0.5) < 0.02);

        Vector bad(2);
        bad << 0.4, 0.3;
        CHECK_THROWS_WITH_AS(sample_index(bad, rng), doctest::Contains("sum to"),
                             std::invalid_argument);
        CHECK_THROWS_AS(sample_index(Vector(), rng), std::invalid_argument);

        std::mt19937_64 a(7), b(7);
        const std::vector<Augmentor> augs{{AugmentOp::identity, 0.0},
                                          {AugmentOp::scale, 2.0}};
        Valuation v = uniform_valuation({"identity", "scale@2"});
        for (int i = 0; i < 20; ++i)
            CHECK(sample_augmentor(v, augs, a).name() == sample_augmentor(v, augs, b).name());
        const std::vector<Augmentor> three{{AugmentOp::identity, 0.0},
                                           {AugmentOp::scale, 2.0},
                                           {AugmentOp::scale, 3.0}};
        CHECK_THROWS_AS(sample_augmentor(v, three, a), std::invalid_argument);
    }

    TEST_CASE("a point mass on identity reproduces plain training exactly") {
        std::mt19937_64 rng(421);
        const Dataset train_set = testutil::structured_dataset(40, 4, 3, rng);
        const TrainConfig cfg{0.2, 150, 1e-4, 11};

        const Model plain = train(train_set, cfg);

        Valuation point;
        point.source_ids = {"identity"};
        point.prior = Vector::Constant(1, 1.0);
        point.scores = Vector::Zero(1);
        point.tau = 1.0;
        point.posterior = Vector::Constant(1, 1.0);
        const std::vector<Augmentor> only_identity{{AugmentOp::identity, 0.0}};

        const Model batch = train_augmented(train_set, only_identity, point, cfg,
                                            AugmentSampling::per_batch);
        CHECK(batch.weights == plain.weights);
        CHECK(batch.bias == plain.bias);

        const Model image = train_augmented(train_set, only_identity, point, cfg,
                                            AugmentSampling::per_image);
        CHECK(image.weights == plain.weights);
        CHECK(image.bias == plain.bias);
    }

    TEST_CASE("duplicate augmentors cannot change the trained model") {
        std::mt19937_64 rng(431);
        const Dataset train_set = testutil::structured_dataset(30, 3, 2, rng);
        const TrainConfig cfg{0.2, 100, 1e-4, 5};

        Valuation point;
        point.source_ids = {"identity"};
        point.prior = Vector::Constant(1, 1.0);
        point.scores = Vector::Zero(1);
        point.tau = 1.0;
        point.posterior = Vector::Constant(1, 1.0);
        const Model lone = train_augmented(train_set, {{AugmentOp::identity, 0.0}}, point, cfg);

        const Model doubled = train_augmented(
            train_set, {{AugmentOp::identity, 0.0}, {AugmentOp::identity, 0.0}},
            uniform_valuation({"identity", "identity"}), cfg);
        CHECK(doubled.weights == lone.weights);
        CHECK(doubled.bias == lone.bias);
    }

    TEST_CASE("augmented training rejects mismatched inputs") {
        std::mt19937_64 rng(433);
        const Dataset train_set = testutil::structured_dataset(20, 3, 2, rng);
        const TrainConfig cfg{0.2, 20, 1e-4, 0};
        const std::vector<Augmentor> augs{{AugmentOp::identity, 0.0},
                                          {AugmentOp::scale, 2.0}};
        CHECK_THROWS_AS(
            train_augmented(train_set, augs, uniform_valuation({"only"}), cfg),
            std::invalid_argument);
    }
}
