#pragma once

#include <array>
#include <string>
#include <vector>

namespace msvg {

struct GeneFitResult;

struct GeneDecision {
    std::string gene_id;
    double e_u1 = 0.0;
    double e_u2 = 0.0;
    double u_tilde = 0.0;
    bool selected = false;
    /// incl[m][k]: posterior inclusion probability of axis k in sample m.
    std::vector<std::array<double, 2>> incl;
    int iterations = 0;
    bool converged = false;
    double final_elbo = 0.0;
};

struct DetectionReport {
    std::vector<GeneDecision> decisions;
    double threshold_u0 = 0.0;
    double bfdr_level = 0.0;
    int degree = 3;
    double gamma2 = 0.01;
    std::vector<std::string> sample_ids;
};

/// Composite score: the larger of the two axis-level posterior probabilities.
double compute_u_tilde(const GeneFitResult& result);
double compute_u_tilde(double e_u1, double e_u2);

/**
 * Bayesian FDR of selecting the genes with 1 - u_tilde < u0: the mean of
 * 1 - u_tilde over the selection, or 0 when nothing is selected.
 */
double bfdr(const std::vector<double>& u_tilde, double u0);

/**
 * Largest u0 among {1 - u_tilde_g} and {level} whose selection is non-empty
 * and has BFDR at most `level`. Returns 0 when no such u0 exists.
 */
double bfdr_threshold(const std::vector<double>& u_tilde, double level);

/// Default level 0.05 / (2 G).
double default_bfdr_level(std::size_t n_genes);

/// Flags for 1 - u_tilde < u0.
std::vector<bool> select_genes(const std::vector<double>& u_tilde, double u0);

/**
 * Builds a report from per-gene results in input order.
 * `level` <= 0 uses the default level.
 */
DetectionReport make_report(const std::vector<std::string>& gene_ids, const std::vector<GeneFitResult>& results,
                            double level, int degree, double gamma2, const std::vector<std::string>& sample_ids);

/// Writes the report as TSV with '#' metadata lines. Throws IoError.
void write_report(const DetectionReport& report, const std::string& path);

/// Reads a report written by `write_report`.
DetectionReport read_report(const std::string& path);

/// Report TSV text.
std::string format_report(const DetectionReport& report);

} // namespace msvg
