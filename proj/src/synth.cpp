#include "distval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace distval {

void validate(const NoiseSpec& noise) {
    if (noise.epsilons.empty()) throw std::invalid_argument("noise spec has no epsilons");
    for (std::size_t i = 0; i < noise.epsilons.size(); ++i)
        if (!(noise.epsilons[i] >= 0.0 && noise.epsilons[i] <= 1.0))
            throw std::invalid_argument(
                msg("epsilon[", i, "] = ", noise.epsilons[i], " outside [0, 1]"));
}

NoiseSpec linear_noise(int source_count, std::uint64_t permutation_seed) {
    if (source_count < 1) throw std::invalid_argument("source count must be >= 1");
    NoiseSpec noise;
    noise.permutation_seed = permutation_seed;
    for (int i = 0; i < source_count; ++i)
        noise.epsilons.push_back(static_cast<double>(i) / static_cast<double>(source_count));
    return noise;
}

namespace {

Matrix draw_means(int num_classes, int dim, double separation, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix means(num_classes, dim);
    double min_dist = 0.0;
    do {
        for (int c = 0; c < num_classes; ++c)
            for (int j = 0; j < dim; ++j) means(c, j) = normal(rng);
        min_dist = std::numeric_limits<double>::infinity();
        for (int a = 0; a < num_classes; ++a)
            for (int b = a + 1; b < num_classes; ++b)
                min_dist = std::min(min_dist, (means.row(a) - means.row(b)).norm());
    } while (min_dist == 0.0);
    // exact rescale, not just a lower bound: separation works as a
    // difficulty dial in both directions
    means *= separation / min_dist;
    return means;
}

Dataset sample_mixture(const Matrix& means, int n_per_class, std::mt19937_64& rng) {
    const auto num_classes = static_cast<int>(means.rows());
    const auto dim = means.cols();
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix features(static_cast<Eigen::Index>(num_classes) * n_per_class, dim);
    Labels labels;
    labels.reserve(static_cast<std::size_t>(features.rows()));
    Eigen::Index row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++row) {
            for (Eigen::Index j = 0; j < dim; ++j) features(row, j) = means(c, j) + normal(rng);
            labels.push_back(c);
        }
    }
    return Dataset(std::move(features), std::move(labels), num_classes);
}

// Deals shuffled per-class indices round-robin into `parts`, carrying the
// pointer across classes so part sizes differ by at most one overall and
// per-class counts stay within one of the proportional share.
std::vector<std::vector<Eigen::Index>> stratified_deal(const Dataset& dataset, int parts,
                                                       std::mt19937_64& rng) {
    std::vector<std::vector<Eigen::Index>> by_class(
        static_cast<std::size_t>(dataset.num_classes()));
    for (Eigen::Index i = 0; i < dataset.size(); ++i)
        by_class[static_cast<std::size_t>(dataset.labels()[static_cast<std::size_t>(i)])]
            .push_back(i);
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(parts));
    std::size_t pointer = 0;
    for (auto& rows : by_class) {
        std::shuffle(rows.begin(), rows.end(), rng);
        for (const auto row : rows) {
            out[pointer % static_cast<std::size_t>(parts)].push_back(row);
            ++pointer;
        }
    }
    return out;
}

Dataset take_rows(const Dataset& dataset, const std::vector<Eigen::Index>& rows) {
    Matrix features(static_cast<Eigen::Index>(rows.size()), dataset.dim());
    Labels labels;
    labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) = dataset.features().row(rows[i]);
        labels.push_back(dataset.labels()[static_cast<std::size_t>(rows[i])]);
    }
    return Dataset(std::move(features), std::move(labels), dataset.num_classes());
}

}  // namespace

Dataset gaussian_mixture(int num_classes, int dim, int n_per_class, double separation,
                         std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("mixture needs at least 2 classes");
    if (dim < 2) throw std::invalid_argument("mixture needs dim >= 2");
    if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
    std::mt19937_64 rng(seed);
    const Matrix means = draw_means(num_classes, dim, separation, rng);
    return sample_mixture(means, n_per_class, rng);
}

Dataset corrupt_labels(const Dataset& dataset, double epsilon, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument(msg("epsilon must be in [0, 1], got ", epsilon));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::uniform_int_distribution<int> other(0, dataset.num_classes() - 2);
    Labels labels = dataset.labels();
    for (auto& label : labels) {
        if (uniform(rng) < epsilon) {
            // uniform over the other classes, never the original label
            const int draw = other(rng);
            label = draw >= label ? draw + 1 : draw;
        }
    }
    return Dataset(dataset.features(), std::move(labels), dataset.num_classes());
}

SourceCollection split_sources(const Dataset& dataset, int source_count, std::uint64_t seed) {
    if (source_count < 1) throw std::invalid_argument("source count must be >= 1");
    if (dataset.size() < source_count)
        throw std::invalid_argument(msg("cannot split ", dataset.size(), " rows into ",
                                        source_count, " sources"));
    std::mt19937_64 rng(seed);
    const auto parts = stratified_deal(dataset, source_count, rng);
    std::vector<std::pair<std::string, Dataset>> sources;
    sources.reserve(parts.size());
    for (std::size_t s = 0; s < parts.size(); ++s)
        sources.emplace_back("source_" + std::to_string(s), take_rows(dataset, parts[s]));
    return SourceCollection(std::move(sources));
}

std::vector<StreamStep> split_stream(const SourceCollection& clean_sources, int steps,
                                     const NoiseSpec& noise, std::uint64_t seed) {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    validate(noise);
    const auto m = clean_sources.size();
    if (noise.epsilons.size() != m)
        throw std::invalid_argument(msg("noise spec covers ", noise.epsilons.size(),
                                        " sources, expected ", m));
    for (std::size_t s = 0; s < m; ++s)
        if (clean_sources.dataset(s).size() < steps)
            throw std::invalid_argument(msg("source '", clean_sources.id(s), "' has only ",
                                            clean_sources.dataset(s).size(), " rows for ",
                                            steps, " steps"));

    // per-source stratified partition into disjoint step parts
    std::vector<std::vector<std::vector<Eigen::Index>>> parts(m);
    for (std::size_t s = 0; s < m; ++s) {
        std::mt19937_64 rng(mix_seed(seed, s));
        parts[s] = stratified_deal(clean_sources.dataset(s), steps, rng);
    }

    std::mt19937_64 perm_rng(noise.permutation_seed);
    std::vector<StreamStep> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int t = 1; t <= steps; ++t) {
        std::vector<int> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), perm_rng);

        StreamStep step;
        step.step_index = t;
        step.noise_permutation = perm;
        for (std::size_t s = 0; s < m; ++s) {
            const double eps = noise.epsilons[static_cast<std::size_t>(perm[s])];
            Dataset clean = take_rows(clean_sources.dataset(s),
                                      parts[s][static_cast<std::size_t>(t - 1)]);
            step.per_source.emplace_back(
                clean_sources.id(s),
                corrupt_labels(clean, eps, mix_seed(seed, 7919 * t + s)));
            step.epsilons.push_back(eps);
        }
        out.push_back(std::move(step));
    }
    return out;
}

AnnotatorFixture make_annotator_fixture(const SynthParams& params) {
    if (params.sources < 1) throw std::invalid_argument("sources must be >= 1");
    if (params.per_class < 1 || params.ref_per_class < 1 || params.test_per_class < 1)
        throw std::invalid_argument("per-class sizes must be >= 1");
    std::mt19937_64 rng(params.seed);
    const Matrix means = draw_means(params.classes, params.dim, params.separation, rng);
    const Dataset pool = sample_mixture(means, params.per_class * params.sources, rng);
    Dataset reference = sample_mixture(means, params.ref_per_class, rng);
    Dataset test = sample_mixture(means, params.test_per_class, rng);

    SourceCollection clean = split_sources(pool, params.sources, mix_seed(params.seed, 1));
    std::vector<double> epsilons = linear_noise(params.sources).epsilons;
    std::vector<std::pair<std::string, Dataset>> noisy;
    noisy.reserve(clean.size());
    for (std::size_t s = 0; s < clean.size(); ++s)
        noisy.emplace_back(clean.id(s), corrupt_labels(clean.dataset(s), epsilons[s],
                                                       mix_seed(params.seed, 100 + s)));
    return AnnotatorFixture{SourceCollection(std::move(noisy)), std::move(clean),
                            std::move(reference), std::move(test), std::move(epsilons)};
}

}  // namespace distval
