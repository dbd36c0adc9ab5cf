#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace msvg {

/// Gene-by-spot counts, stored row-major so each gene's counts are contiguous.
using CountMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * One tissue section.
 *
 * `counts` is genes x spots and holds non-negative integers.
 * `coords` is spots x 2 and `covariates` is spots x J.
 */
struct SpatialSample {
    std::string sample_id;
    CountMatrix counts;
    Eigen::MatrixXd coords;
    Eigen::MatrixXd covariates;
    std::vector<std::string> covariate_names;
    std::vector<std::string> spot_ids;
    std::vector<std::string> gene_ids;

    std::size_t n_spots() const { return spot_ids.size(); }
    std::size_t n_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
};

/// Several samples sharing one gene axis; `samples[m].gene_ids == gene_ids` for all m.
struct MultiSampleDataset {
    std::vector<SpatialSample> samples;
    std::vector<std::string> gene_ids;

    std::size_t n_genes() const { return gene_ids.size(); }
    std::size_t n_samples() const { return samples.size(); }
};

enum class CountFormat { dense, triplet };

struct ManifestEntry {
    std::string sample_id;
    std::string counts_path;
    std::string coords_path;
    /// Empty when the sample has no covariates.
    std::string covariates_path;
    CountFormat format = CountFormat::dense;
    /// Gene and spot identifier lists, required for the triplet format.
    std::string genes_path;
    std::string spots_path;
};

/**
 * Sample listing read from an INI-style file:
 *
 *     [sample_a]
 *     counts = a_counts.tsv
 *     coords = a_coords.tsv
 *     covariates = a_cov.tsv
 *     format = dense
 *
 * Relative paths are resolved against the manifest's directory.
 */
struct Manifest {
    std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

/// Checks the invariants of a single sample. Throws DataError on violation.
void validate_sample(const SpatialSample& sample);

/// Loads one sample, matching the spot axes of its files by spot id.
SpatialSample load_sample(const ManifestEntry& entry);

/**
 * Loads all samples and restricts them to the genes present in every sample,
 * in the order of the first sample.
 */
MultiSampleDataset load_dataset(const Manifest& manifest);
MultiSampleDataset load_dataset(const std::string& manifest_path);

/// Restricts every sample to `gene_ids`, in that order.
MultiSampleDataset align_genes(std::vector<SpatialSample> samples, const std::vector<std::string>& gene_ids);

/**
 * Removes spots expressing fewer than `min_genes_per_spot` genes, then genes
 * expressed in fewer than `min_spots_per_gene` spots of any sample.
 * The two steps repeat until nothing changes, so the result is a fixed point.
 */
MultiSampleDataset filter_dataset(const MultiSampleDataset& ds, std::size_t min_spots_per_gene,
                                  std::size_t min_genes_per_spot);

/**
 * Writes every sample into `dir` with a manifest named `manifest.ini`.
 * Returns the manifest path.
 */
std::string write_dataset(const MultiSampleDataset& ds, const std::string& dir, CountFormat format = CountFormat::dense);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Parses a double; throws DataError with `context` on failure.
double parse_double(const std::string& text, const std::string& context);

/// Splits a line on tabs.
std::vector<std::string> split_tabs(const std::string& line);

} // namespace msvg
