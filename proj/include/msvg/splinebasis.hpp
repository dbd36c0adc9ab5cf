#pragma once

#include "msvg/dataio.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace msvg {

/**
 * Spline basis on [0, 1] with boundary knots only, so the basis functions
 * are the Bernstein polynomials of the given degree. The constant term
 * (index 0) is dropped, which leaves `degree` functions per axis.
 */
struct BasisSpec {
    int degree = 3;

    int size() const { return degree; }
};

/// Maps each column affinely onto [0, 1]. A constant column maps to 0.5.
Eigen::MatrixXd normalize_coords(const Eigen::MatrixXd& coords);

/// Evaluates the basis at `t`, returning `spec.degree` values.
Eigen::VectorXd eval_basis(const BasisSpec& spec, double t);

/**
 * Design matrix with columns [1, basis(s1), basis(s2), covariates].
 * Coordinates must already be normalized to [0, 1].
 */
Eigen::MatrixXd build_design(const SpatialSample& sample, const BasisSpec& spec);

struct DegreeSelectionOptions {
    std::vector<int> candidates = {1, 2, 3, 4};
    int fallback_degree = 3;
    int max_iter = 200;
    int workers = 1;
};

struct DegreeSelectionResult {
    int degree = 3;
    /// Best degree for each sample.
    std::vector<int> per_sample;
    /// aic[m][c]: mean AIC of candidate c in sample m (NaN when no fit converged).
    std::vector<std::vector<double>> aic;
    std::vector<std::string> warnings;
};

/// The largest per-sample optimal degree.
int combine_degree_votes(const std::vector<int>& per_sample);

/**
 * Chooses the spline degree by fitting a zero-inflated negative binomial
 * regression by maximum likelihood to each gene in `gene_subset`, for each
 * sample and candidate degree. Each sample votes for the degree with the
 * lowest AIC averaged over genes; the largest vote wins.
 */
DegreeSelectionResult select_degree(const MultiSampleDataset& ds, const std::vector<std::size_t>& gene_subset,
                                    const DegreeSelectionOptions& opts = {});

/// Up to `count` distinct gene indices drawn with a seeded generator, sorted.
std::vector<std::size_t> sample_gene_subset(std::size_t n_genes, std::size_t count, std::uint64_t seed);

} // namespace msvg
