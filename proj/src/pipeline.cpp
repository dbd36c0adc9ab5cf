#include "msvg/pipeline.hpp"

#include "msvg/error.hpp"
#include "msvg/parallel.hpp"

#include <atomic>
#include <string>

namespace msvg {

MultiSampleDataset normalize_dataset(const MultiSampleDataset& ds) {
    MultiSampleDataset out = ds;
    for (auto& s : out.samples) {
        s.coords = normalize_coords(s.coords);
    }
    return out;
}

GeneData gene_data(const MultiSampleDataset& ds, const std::vector<Eigen::MatrixXd>& designs, std::size_t gene,
                   const CoefLayout& layout) {
    GeneData data;
    data.layout = layout;
    for (std::size_t m = 0; m < ds.n_samples(); ++m) {
        data.counts.push_back(ds.samples[m].counts.row(static_cast<Eigen::Index>(gene)).transpose());
        data.designs.push_back(designs[m]);
    }
    return data;
}

std::vector<GeneFitResult> fit_all_genes(const MultiSampleDataset& normalized, int degree, const Hyperparameters& hp,
                                         const FitOptions& fit, int workers, const LogFn& log) {
    const std::size_t J = normalized.samples.front().n_covariates();
    for (const auto& s : normalized.samples) {
        if (s.n_covariates() != J) {
            throw DataError("all samples must carry the same number of covariates");
        }
    }
    const CoefLayout layout{degree, static_cast<int>(J)};
    std::vector<Eigen::MatrixXd> designs;
    for (const auto& s : normalized.samples) {
        designs.push_back(build_design(s, BasisSpec{degree}));
    }
    const std::size_t G = normalized.n_genes();
    std::vector<GeneFitResult> results(G);
    std::atomic<std::size_t> done{0};
    parallel_for(G, workers, [&](std::size_t g) {
        FitOptions opts = fit;
        opts.seed = fit.seed ^ static_cast<std::uint64_t>(g);
        results[g] = fit_gene(gene_data(normalized, designs, g, layout), hp, opts);
        const std::size_t finished = ++done;
        if (log && (finished % 500 == 0 || finished == G)) {
            log("fitted " + std::to_string(finished) + " of " + std::to_string(G) + " genes");
        }
    });
    return results;
}

DetectOutput detect(const MultiSampleDataset& input, const DetectConfig& cfg, const LogFn& log) {
    DetectOutput out;
    MultiSampleDataset ds = cfg.filter ? filter_dataset(input, cfg.min_spots_per_gene, cfg.min_genes_per_spot) : input;
    if (log) {
        log("dataset: " + std::to_string(ds.n_samples()) + " samples, " + std::to_string(ds.n_genes()) + " genes");
    }
    ds = normalize_dataset(ds);

    int degree = cfg.degree;
    if (degree == 0) {
        DegreeSelectionOptions opts;
        opts.candidates = cfg.degree_candidates;
        opts.workers = cfg.workers;
        const auto subset = sample_gene_subset(ds.n_genes(), cfg.degree_gene_count, cfg.seed);
        const DegreeSelectionResult sel = select_degree(ds, subset, opts);
        degree = sel.degree;
        out.warnings.insert(out.warnings.end(), sel.warnings.begin(), sel.warnings.end());
        if (log) {
            log("selected spline degree " + std::to_string(degree));
        }
    }

    Hyperparameters hp = default_hyperparameters(degree, ds.n_samples());
    if (cfg.gamma2 > 0.0) {
        hp.gamma2 = cfg.gamma2;
    }
    FitOptions fit = cfg.fit;
    fit.seed = cfg.seed;
    out.results = fit_all_genes(ds, degree, hp, fit, cfg.workers, log);

    std::vector<std::string> sample_ids;
    for (const auto& s : ds.samples) {
        sample_ids.push_back(s.sample_id);
    }
    for (std::size_t g = 0; g < out.results.size(); ++g) {
        const auto& r = out.results[g];
        if (!r.converged && r.message.rfind("numerical failure", 0) == 0) {
            ++out.failed;
            out.warnings.push_back("gene '" + ds.gene_ids[g] + "': " + r.message);
        }
    }
    out.report = make_report(ds.gene_ids, out.results, cfg.bfdr_level, degree, hp.gamma2, sample_ids);
    return out;
}

} // namespace msvg
