#include "msvg/splinebasis.hpp"

#include "msvg/error.hpp"
#include "msvg/parallel.hpp"
#include "msvg/zinb_mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace msvg {

Eigen::MatrixXd normalize_coords(const Eigen::MatrixXd& coords) {
    if (!coords.allFinite()) {
        throw DomainError("normalize_coords: non-finite coordinate");
    }
    Eigen::MatrixXd out(coords.rows(), coords.cols());
    for (Eigen::Index c = 0; c < coords.cols(); ++c) {
        if (coords.rows() == 0) {
            break;
        }
        const double lo = coords.col(c).minCoeff();
        const double hi = coords.col(c).maxCoeff();
        if (hi > lo) {
            out.col(c) = ((coords.col(c).array() - lo) / (hi - lo)).matrix();
        } else {
            out.col(c).setConstant(0.5);
        }
    }
    return out;
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double t) {
    if (spec.degree < 1 || spec.degree > 4) {
        throw DomainError("eval_basis: degree must be in 1..4");
    }
    constexpr double tol = 1e-9;
    if (!(t >= -tol && t <= 1.0 + tol)) {
        throw DomainError("eval_basis: argument outside [0, 1]");
    }
    t = std::clamp(t, 0.0, 1.0);
    const int d = spec.degree;
    Eigen::VectorXd out(d);
    double binom = 1.0;
    for (int l = 1; l <= d; ++l) {
        binom = binom * (d - l + 1) / l;
        out(l - 1) = binom * std::pow(t, l) * std::pow(1.0 - t, d - l);
    }
    return out;
}

Eigen::MatrixXd build_design(const SpatialSample& sample, const BasisSpec& spec) {
    const Eigen::Index n = sample.coords.rows();
    const Eigen::Index L = spec.size();
    const Eigen::Index J = sample.covariates.cols();
    Eigen::MatrixXd design(n, 1 + 2 * L + J);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        design.block(i, 1, 1, L) = eval_basis(spec, sample.coords(i, 0)).transpose();
        design.block(i, 1 + L, 1, L) = eval_basis(spec, sample.coords(i, 1)).transpose();
        if (J > 0) {
            design.block(i, 1 + 2 * L, 1, J) = sample.covariates.row(i);
        }
    }
    return design;
}

int combine_degree_votes(const std::vector<int>& per_sample) {
    if (per_sample.empty()) {
        throw DomainError("combine_degree_votes: no votes");
    }
    return *std::max_element(per_sample.begin(), per_sample.end());
}

DegreeSelectionResult select_degree(const MultiSampleDataset& ds, const std::vector<std::size_t>& gene_subset,
                                    const DegreeSelectionOptions& opts) {
    if (opts.candidates.empty()) {
        throw DomainError("select_degree: no candidate degrees");
    }
    for (int d : opts.candidates) {
        if (d < 1 || d > 4) {
            throw DomainError("select_degree: candidate degrees must lie in 1..4");
        }
    }
    DegreeSelectionResult result;
    if (opts.candidates.size() == 1) {
        result.degree = opts.candidates.front();
        result.per_sample.assign(ds.n_samples(), result.degree);
        return result;
    }
    if (gene_subset.empty()) {
        throw DomainError("select_degree: empty gene subset");
    }

    const std::size_t M = ds.n_samples();
    const std::size_t C = opts.candidates.size();
    const std::size_t G = gene_subset.size();

    std::vector<std::vector<Eigen::MatrixXd>> designs(M, std::vector<Eigen::MatrixXd>(C));
    for (std::size_t m = 0; m < M; ++m) {
        SpatialSample normalized = ds.samples[m];
        normalized.coords = normalize_coords(normalized.coords);
        for (std::size_t c = 0; c < C; ++c) {
            designs[m][c] = build_design(normalized, BasisSpec{opts.candidates[c]});
        }
    }

    // loglik[(m * G + g) * C + c]
    std::vector<double> loglik(M * G * C, std::numeric_limits<double>::quiet_NaN());
    ZinbMleOptions mle;
    mle.max_iter = opts.max_iter;
    parallel_for(M * G * C, opts.workers, [&](std::size_t task) {
        const std::size_t c = task % C;
        const std::size_t g = (task / C) % G;
        const std::size_t m = task / (C * G);
        const Eigen::VectorXd y = ds.samples[m].counts.row(static_cast<Eigen::Index>(gene_subset[g])).transpose();
        const ZinbMleFit fit = fit_zinb_mle(y, designs[m][c], mle);
        if (fit.converged && std::isfinite(fit.log_likelihood)) {
            loglik[task] = fit.log_likelihood;
        }
    });

    result.aic.assign(M, std::vector<double>(C, std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<double> sum(C, 0.0);
        std::size_t used = 0;
        for (std::size_t g = 0; g < G; ++g) {
            bool all = true;
            for (std::size_t c = 0; c < C; ++c) {
                all = all && std::isfinite(loglik[(m * G + g) * C + c]);
            }
            if (!all) {
                continue;
            }
            ++used;
            for (std::size_t c = 0; c < C; ++c) {
                sum[c] += loglik[(m * G + g) * C + c];
            }
        }
        if (used == 0) {
            result.per_sample.push_back(opts.fallback_degree);
            result.warnings.push_back("degree selection: no converged fits in sample '" + ds.samples[m].sample_id
                                      + "', using degree " + std::to_string(opts.fallback_degree));
            continue;
        }
        const double J = static_cast<double>(ds.samples[m].covariates.cols());
        std::size_t best = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const double k = 2.0 + 1.0 + 2.0 * opts.candidates[c] + J;
            result.aic[m][c] = 2.0 * k - 2.0 * sum[c] / static_cast<double>(used);
            if (result.aic[m][c] < result.aic[m][best]) {
                best = c;
            }
        }
        result.per_sample.push_back(opts.candidates[best]);
    }
    result.degree = combine_degree_votes(result.per_sample);
    return result;
}

std::vector<std::size_t> sample_gene_subset(std::size_t n_genes, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(n_genes);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (count >= n_genes) {
        return idx;
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n_genes - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace msvg
