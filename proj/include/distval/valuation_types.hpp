#ifndef DISTVAL_VALUATION_TYPES_HPP
#define DISTVAL_VALUATION_TYPES_HPP

#include <string>
#include <vector>

#include "distval/common.hpp"

namespace distval {

/// A normalized probability vector over a finite ordered source set,
/// together with the raw transferability scores and temperature that
/// produced it. prior and posterior each sum to 1.
struct Valuation {
    std::vector<std::string> source_ids;
    Vector prior;
    Vector scores;
    double tau = 1.0;
    Vector posterior;

    Eigen::Index size() const { return posterior.size(); }
};

/// Checks normalization and shape consistency; throws on violation.
void validate(const Valuation& valuation, double tol = 1e-9);

Vector uniform_prior(Eigen::Index count);

Valuation uniform_valuation(std::vector<std::string> source_ids);

}  // namespace distval

#endif
