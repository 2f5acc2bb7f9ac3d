#ifndef DISTVAL_SYNTH_HPP
#define DISTVAL_SYNTH_HPP

#include "distval/continual.hpp"
#include "distval/dataset.hpp"

namespace distval {

/// Per-source label-flip probabilities plus the seed controlling how they
/// are permuted across stream steps.
struct NoiseSpec {
    std::vector<double> epsilons;
    std::uint64_t permutation_seed = 0;
};

void validate(const NoiseSpec& noise);

/// Flip probabilities i/M for sources i = 0..M-1.
NoiseSpec linear_noise(int source_count, std::uint64_t permutation_seed = 0);

/// Balanced isotropic Gaussian mixture. Class means are drawn from the
/// seed and rescaled so the closest pair sits exactly at the separation
/// distance; samples add unit-variance noise. Rows are ordered class-major.
Dataset gaussian_mixture(int num_classes, int dim, int n_per_class, double separation,
                         std::uint64_t seed);

/// Independently flips each label with probability epsilon to a uniformly
/// random *different* class; features untouched.
Dataset corrupt_labels(const Dataset& dataset, double epsilon, std::uint64_t seed);

/// Random disjoint near-equal partition (sizes differ by at most 1),
/// stratified by class where possible.
SourceCollection split_sources(const Dataset& dataset, int source_count, std::uint64_t seed);

/// Splits each source's clean data into disjoint per-step parts and
/// corrupts each step with that step's permuted noise assignment. The
/// permutation used is recorded on each step.
std::vector<StreamStep> split_stream(const SourceCollection& clean_sources, int steps,
                                     const NoiseSpec& noise, std::uint64_t seed);

/// Desk-scale annotator protocol: a mixture task split among M sources
/// with linearly increasing label noise, plus clean reference and test
/// sets drawn from the same mixture.
struct SynthParams {
    int classes = 10;
    int dim = 20;
    int per_class = 100;       // per class per source
    int sources = 5;
    int ref_per_class = 50;
    int test_per_class = 100;
    double separation = 3.0;
    std::uint64_t seed = 0;
};

struct AnnotatorFixture {
    SourceCollection sources;        // noisy, as delivered by the annotators
    SourceCollection clean_sources;  // same split before corruption
    Dataset reference;
    Dataset test;
    std::vector<double> epsilons;
};

AnnotatorFixture make_annotator_fixture(const SynthParams& params);

}  // namespace distval

#endif
