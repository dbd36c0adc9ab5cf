#pragma once

#include "msvg/dataio.hpp"
#include "msvg/selection.hpp"
#include "msvg/splinebasis.hpp"
#include "msvg/viengine.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace msvg {

struct DetectConfig {
    /// 0 selects the degree automatically from `degree_candidates`.
    int degree = 0;
    std::vector<int> degree_candidates = {1, 2, 3, 4};
    std::size_t degree_gene_count = 50;
    /// Non-positive values use the sample-count default.
    double gamma2 = 0.0;
    /// Non-positive values use 0.05 / (2 G).
    double bfdr_level = 0.0;
    FitOptions fit{};
    int workers = 1;
    std::size_t min_spots_per_gene = 100;
    std::size_t min_genes_per_spot = 100;
    bool filter = true;
    std::uint64_t seed = 1;
};

struct DetectOutput {
    DetectionReport report;
    std::vector<GeneFitResult> results;
    std::vector<std::string> warnings;
    /// Genes whose fit stopped on a numerical failure.
    std::size_t failed = 0;
};

using LogFn = std::function<void(const std::string&)>;

/// Design matrices and gene data for one gene of a dataset with normalized coordinates.
GeneData gene_data(const MultiSampleDataset& ds, const std::vector<Eigen::MatrixXd>& designs, std::size_t gene,
                   const CoefLayout& layout);

/// Copy of the dataset with every sample's coordinates mapped to [0, 1].
MultiSampleDataset normalize_dataset(const MultiSampleDataset& ds);

/// Fits every gene in parallel; results are in gene order regardless of `workers`.
std::vector<GeneFitResult> fit_all_genes(const MultiSampleDataset& normalized, int degree, const Hyperparameters& hp,
                                         const FitOptions& fit, int workers, const LogFn& log = {});

/// Filter, choose the degree, fit every gene and select by Bayesian FDR.
DetectOutput detect(const MultiSampleDataset& ds, const DetectConfig& cfg, const LogFn& log = {});

} // namespace msvg
