#include "distval/transferability.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace distval {

Measure parse_measure(const std::string& name) {
    if (name == "leep") return Measure::leep;
    if (name == "logme") return Measure::logme;
    if (name == "etran" || name == "etran_energy") return Measure::etran_energy;
    if (name == "mmd" || name == "neg_mmd") return Measure::neg_mmd;
    if (name == "cmmd" || name == "cond_neg_mmd") return Measure::cond_neg_mmd;
    throw std::invalid_argument(msg("unknown transferability measure '", name, "'"));
}

std::string measure_name(Measure measure) {
    switch (measure) {
        case Measure::leep: return "leep";
        case Measure::logme: return "logme";
        case Measure::etran_energy: return "etran_energy";
        case Measure::neg_mmd: return "neg_mmd";
        case Measure::cond_neg_mmd: return "cond_neg_mmd";
    }
    throw std::logic_error("unreachable");
}

bool measure_needs_labels(Measure measure) {
    return measure == Measure::leep || measure == Measure::logme ||
           measure == Measure::cond_neg_mmd;
}

namespace {

void check_labels(const Labels& labels, Eigen::Index n, int num_classes) {
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument(msg("label count ", labels.size(),
                                        " does not match row count ", n));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw std::invalid_argument(msg("label ", labels[i], " at row ", i,
                                            " outside [0, ", num_classes, ")"));
}

}  // namespace

TransferabilityScore leep(const Matrix& probs, const Labels& labels, int num_classes) {
    const auto n = probs.rows();
    const auto z_count = probs.cols();
    if (n < 1) throw std::invalid_argument("leep requires at least one row");
    check_labels(labels, n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double row_sum = probs.row(i).sum();
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw std::invalid_argument(
                msg("probability row ", i, " sums to ", row_sum, ", expected 1"));
    }

    // empirical joint of (target label, pseudo class)
    Matrix joint = Matrix::Zero(num_classes, z_count);
    for (Eigen::Index i = 0; i < n; ++i)
        joint.row(labels[static_cast<std::size_t>(i)]) += probs.row(i);
    joint /= static_cast<double>(n);
    const Vector marginal = joint.colwise().sum().transpose();
    Matrix conditional = Matrix::Zero(num_classes, z_count);
    for (Eigen::Index z = 0; z < z_count; ++z)
        if (marginal(z) > 0) conditional.col(z) = joint.col(z) / marginal(z);

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = conditional.row(labels[static_cast<std::size_t>(i)]).dot(probs.row(i));
        total += std::log(std::max(p, 1e-12));
    }
    return {total / static_cast<double>(n), Measure::leep};
}

namespace {

// Log evidence of the Bayesian linear model at fixed precisions, expressed
// through the singular values. `proj` holds U^T y, `orth` the squared norm
// of y outside the feature column space.
double log_evidence(double alpha, double beta, const Vector& sigma2, const Vector& proj,
                    double orth, Eigen::Index n, Eigen::Index k) {
    const auto r = sigma2.size();
    double m2 = 0.0, res = 0.0, logdet = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
        const double denom = alpha + beta * sigma2(i);
        const double mi = beta * std::sqrt(sigma2(i)) * proj(i) / denom;
        m2 += mi * mi;
        const double diff = proj(i) - std::sqrt(sigma2(i)) * mi;
        res += diff * diff;
        logdet += std::log(denom);
    }
    res += orth;
    logdet += static_cast<double>(k - r) * std::log(alpha);
    return 0.5 * (static_cast<double>(n) * std::log(beta) + static_cast<double>(k) * std::log(alpha) -
                  static_cast<double>(n) * std::log(2.0 * M_PI) - beta * res - alpha * m2 - logdet);
}

}  // namespace

TransferabilityScore logme(const Matrix& features, const Labels& labels, int num_classes) {
    const auto n = features.rows();
    const auto k = features.cols();
    if (n < 2) throw std::invalid_argument(msg("logme requires n >= 2, got ", n));
    if (k < 1) throw std::invalid_argument("logme requires at least one feature column");
    check_labels(labels, n, num_classes);
    if (features.isZero(0.0))
        throw std::invalid_argument("logme is undefined for an all-zero feature matrix");

    Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinU);
    const Vector sigma = svd.singularValues();
    const Vector sigma2 = sigma.array().square();
    const Matrix& u = svd.matrixU();
    const auto r = sigma.size();

    double total = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        Vector y = Vector::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == c) y(i) = 1.0;
        const Vector proj = u.transpose() * y;
        const double orth = std::max(y.squaredNorm() - proj.squaredNorm(), 0.0);

        double alpha = 1.0, beta = 1.0;
        bool converged = false;
        for (int iter = 0; iter < 100; ++iter) {
            double m2 = 0.0, res = 0.0, gamma = 0.0;
            for (Eigen::Index i = 0; i < r; ++i) {
                const double denom = alpha + beta * sigma2(i);
                const double mi = beta * sigma(i) * proj(i) / denom;
                m2 += mi * mi;
                const double diff = proj(i) - sigma(i) * mi;
                res += diff * diff;
                gamma += beta * sigma2(i) / denom;
            }
            res += orth;
            const double alpha_new = gamma / std::max(m2, 1e-300);
            const double beta_new =
                (static_cast<double>(n) - gamma) / std::max(res, 1e-300);
            const double da = std::abs(alpha_new - alpha) / std::max(alpha, 1e-300);
            const double db = std::abs(beta_new - beta) / std::max(beta, 1e-300);
            alpha = alpha_new;
            beta = beta_new;
            if (da < 1e-6 && db < 1e-6) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw std::runtime_error(msg("logme fixed point did not converge for class ", c,
                                         " after 100 iterations (alpha=", alpha, ", beta=", beta,
                                         ")"));
        total += log_evidence(alpha, beta, sigma2, proj, orth, n, k);
    }
    return {total / (static_cast<double>(n) * static_cast<double>(num_classes)), Measure::logme};
}

TransferabilityScore etran_energy(const Matrix& features) {
    const auto n = features.rows();
    if (n < 1) throw std::invalid_argument("etran_energy requires at least one row");
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double row_max = features.row(i).maxCoeff();
        total += std::log((features.row(i).array() - row_max).exp().sum()) + row_max;
    }
    return {total / static_cast<double>(n), Measure::etran_energy};
}

double median_heuristic_bandwidth(const Matrix& sample, const Matrix& reference) {
    if (sample.cols() != reference.cols())
        throw std::invalid_argument(msg("feature dim mismatch: ", sample.cols(), " vs ",
                                        reference.cols()));
    const auto n = sample.rows() + reference.rows();
    if (n < 2) throw std::invalid_argument("median heuristic requires at least 2 rows in total");
    Matrix all(n, sample.cols());
    all << sample, reference;
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            dists.push_back((all.row(i) - all.row(j)).norm());
    std::sort(dists.begin(), dists.end());
    const std::size_t count = dists.size();
    const double median = (count % 2 == 1)
                              ? dists[count / 2]
                              : 0.5 * (dists[count / 2 - 1] + dists[count / 2]);
    return median > 0 ? median : 1.0;
}

namespace {

// Biased squared MMD with RBF kernel exp(-||x-y||^2 / (2 sigma^2)).
double biased_mmd2(const Matrix& x, const Matrix& y, double sigma) {
    const double scale = -1.0 / (2.0 * sigma * sigma);
    auto mean_kernel = [scale](const Matrix& a, const Matrix& b) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < b.rows(); ++j)
                total += std::exp(scale * (a.row(i) - b.row(j)).squaredNorm());
        return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
    };
    return mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
}

Matrix rows_of_class(const Matrix& m, const Labels& labels, int c) {
    Eigen::Index count = 0;
    for (auto l : labels)
        if (l == c) ++count;
    Matrix out(count, m.cols());
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (labels[static_cast<std::size_t>(i)] == c) out.row(at++) = m.row(i);
    return out;
}

}  // namespace

TransferabilityScore neg_mmd(const Matrix& sample, const Matrix& reference,
                             const KernelSpec& kernel, bool class_conditional,
                             const Labels* sample_labels, const Labels* reference_labels) {
    if (sample.cols() != reference.cols())
        throw std::invalid_argument(msg("feature dim mismatch: ", sample.cols(), " vs ",
                                        reference.cols()));
    if (sample.rows() < 1 || reference.rows() < 1)
        throw std::invalid_argument("neg_mmd requires nonempty sample and reference");
    if (class_conditional != (sample_labels != nullptr && reference_labels != nullptr))
        throw std::invalid_argument(
            "labels must be supplied iff class_conditional is requested");
    double sigma;
    if (kernel.bandwidth) {
        sigma = *kernel.bandwidth;
        if (!(sigma > 0))
            throw std::invalid_argument(msg("kernel bandwidth must be > 0, got ", sigma));
    } else {
        sigma = median_heuristic_bandwidth(sample, reference);
    }

    if (!class_conditional)
        return {-biased_mmd2(sample, reference, sigma), Measure::neg_mmd};

    check_labels(*sample_labels, sample.rows(),
                 1 + *std::max_element(sample_labels->begin(), sample_labels->end()));
    std::set<int> sample_classes(sample_labels->begin(), sample_labels->end());
    std::set<int> reference_classes(reference_labels->begin(), reference_labels->end());
    double total = 0.0;
    int included = 0;
    for (int c : sample_classes) {
        if (!reference_classes.count(c)) {
            std::cerr << "neg_mmd: class " << c << " absent from reference, skipped\n";
            continue;
        }
        total += -biased_mmd2(rows_of_class(sample, *sample_labels, c),
                              rows_of_class(reference, *reference_labels, c), sigma);
        ++included;
    }
    for (int c : reference_classes)
        if (!sample_classes.count(c))
            std::cerr << "neg_mmd: class " << c << " absent from sample, skipped\n";
    if (included == 0)
        throw std::invalid_argument("class-conditional mmd: no classes shared by both sets");
    return {total / included, Measure::cond_neg_mmd};
}

}  // namespace distval
