#pragma once

#include "msvg/dataio.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msvg {

enum class PatternKind {
    linear,
    focal,
    periodic,
    sigmoid,
    poly1,
    poly2,
    poly3,
    poly4,
    linear_focal,
    linear_periodic,
    focal_periodic,
    nngp,
    none
};

PatternKind parse_pattern(const std::string& name);
std::string pattern_name(PatternKind kind);

/// Exponential-covariance Gaussian field settings, distances in unit-square coordinates.
struct NngpParams {
    double variance = 0.5;
    double length_scale = 0.2;
    double nugget = 0.1;
};

/**
 * Value of the spatial effect at evaluation coordinate `s` (in [-2, 2]).
 * Hybrid kinds use their first form on axis 0 and the second on axis 1.
 */
double spatial_effect(PatternKind kind, double beta0, double s, int axis = 0);

/// Signal amplitudes for the four strength tiers (high, medium, low, extremely low).
std::array<double, 4> strength_tiers(PatternKind kind);

/// Tier index (0..3) used by sample `m` under setting 1..4.
int setting_tier(int setting, std::size_t m);

struct SimConfig {
    std::size_t n_samples = 4;
    std::size_t grid_rows = 32;
    std::size_t grid_cols = 32;
    std::size_t n_genes = 5000;
    std::size_t n_sv = 500;
    PatternKind pattern = PatternKind::linear;
    int setting = 1;
    double dropout = 0.3;
    double dispersion = 15.0;
    double intercept_mean = 2.0;
    double intercept_sd = 0.5;
    double covariate_sd = 1.0;
    /// Dirichlet parameters of the cell-type proportions, one vector per quadrant.
    std::vector<std::vector<double>> region_dirichlet = {
        {1, 1, 1, 1, 1, 1}, {1, 3, 5, 7, 9, 11}, {14, 12, 10, 8, 6, 4}, {1, 4, 4, 4, 4, 1}};
    NngpParams nngp{};
    /// Per-sample amplitude overriding the setting table.
    std::optional<std::vector<double>> beta0_override;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Settings echoed into the ground-truth file for scoring.
struct RunInfo {
    std::uint64_t seed = 0;
    int setting = 0;
    std::string pattern;
    double dropout = 0.0;
};

struct GroundTruth {
    RunInfo run;
    std::vector<std::string> gene_ids;
    std::vector<bool> is_sv;
    std::vector<PatternKind> pattern;
    /// beta0[g][m]
    std::vector<std::vector<double>> beta0;
    /// intercept[g][m]
    std::vector<std::vector<double>> intercept;
    /// covariate_effects[g][m]
    std::vector<std::vector<std::vector<double>>> covariate_effects;
};

struct SimulatedData {
    MultiSampleDataset dataset;
    GroundTruth truth;
};

/// Generates a dataset; identical configurations give identical output.
SimulatedData generate(const SimConfig& cfg);

void write_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth read_ground_truth(const std::string& path);

} // namespace msvg
