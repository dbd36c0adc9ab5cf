// msvg: detect, simulate, evaluate, stability.

#include "msvg/dataio.hpp"
#include "msvg/error.hpp"
#include "msvg/evalmetrics.hpp"
#include "msvg/pipeline.hpp"
#include "msvg/selection.hpp"
#include "msvg/simgen.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace {

using namespace msvg;

int env_workers() {
    if (const char* v = std::getenv("MSVG_WORKERS")) {
        try {
            const int n = std::stoi(v);
            if (n >= 1) {
                return n;
            }
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring MSVG_WORKERS=" << v << '\n';
    }
    return 1;
}

std::set<std::string> selected_ids(const DetectionReport& report) {
    std::set<std::string> out;
    for (const auto& d : report.decisions) {
        if (d.selected) {
            out.insert(d.gene_id);
        }
    }
    return out;
}

// Writes to a temporary sibling and renames, so failures leave no partial file.
void write_atomically(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text)) {
            throw IoError("cannot write " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

struct DetectArgs {
    std::string manifest;
    std::string out;
    std::string degree = "auto";
    std::string gamma2 = "auto";
    double bfdr_level = 0.0;
    int max_iter = 500;
    double tol = 1e-2;
    int workers = 0;
    std::uint64_t seed = 1;
    std::size_t min_spots = 100;
    std::size_t min_genes = 100;
    bool no_filter = false;
};

int cmd_detect(const DetectArgs& a) {
    DetectConfig cfg;
    if (a.degree == "auto") {
        cfg.degree = 0;
    } else {
        cfg.degree = std::stoi(a.degree);
        if (cfg.degree < 1 || cfg.degree > 4) {
            throw DomainError("--degree must be 1..4 or auto");
        }
    }
    if (a.gamma2 != "auto") {
        cfg.gamma2 = parse_double(a.gamma2, "--gamma2");
        if (!(cfg.gamma2 > 0.0 && cfg.gamma2 < 1.0)) {
            throw DomainError("--gamma2 must lie in (0, 1)");
        }
    }
    cfg.bfdr_level = a.bfdr_level;
    cfg.fit.max_iter = a.max_iter;
    cfg.fit.elbo_tol = a.tol;
    cfg.seed = a.seed;
    cfg.workers = a.workers > 0 ? a.workers : env_workers();
    cfg.min_spots_per_gene = a.min_spots;
    cfg.min_genes_per_spot = a.min_genes;
    cfg.filter = !a.no_filter;

    const MultiSampleDataset ds = load_dataset(a.manifest);
    const DetectOutput out = detect(ds, cfg, [](const std::string& line) { std::cerr << line << '\n'; });
    for (const auto& w : out.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    for (std::size_t g = 0; g < out.results.size(); ++g) {
        if (out.results[g].message.rfind("numerical failure", 0) == 0) {
            std::cerr << "gene " << out.report.decisions[g].gene_id << ": " << out.results[g].message << '\n';
        }
    }
    write_atomically(a.out, format_report(out.report));

    const std::size_t total = out.results.size();
    std::size_t chosen = 0;
    for (const auto& d : out.report.decisions) {
        chosen += d.selected ? 1 : 0;
    }
    std::cerr << "genes=" << total << " selected=" << chosen << " failed=" << out.failed << " u0="
              << format_double(out.report.threshold_u0) << '\n';
    return 100 * out.failed <= total ? 0 : 2;
}

struct SimulateArgs {
    std::string out;
    int setting = 1;
    std::string pattern = "linear";
    double dropout = 0.3;
    std::size_t grid = 32;
    std::size_t genes = 5000;
    std::size_t sv_genes = 500;
    std::size_t samples = 4;
    std::uint64_t seed = 1;
    std::string format = "dense";
};

int cmd_simulate(const SimulateArgs& a) {
    SimConfig cfg;
    cfg.setting = a.setting;
    cfg.pattern = parse_pattern(a.pattern);
    cfg.dropout = a.dropout;
    cfg.grid_rows = cfg.grid_cols = a.grid;
    cfg.n_genes = a.genes;
    cfg.n_sv = a.sv_genes;
    cfg.n_samples = a.samples;
    cfg.seed = a.seed;
    cfg.validate();
    const SimulatedData sim = generate(cfg);
    const CountFormat format = a.format == "triplet" ? CountFormat::triplet : CountFormat::dense;
    const std::string manifest = write_dataset(sim.dataset, a.out, format);
    write_ground_truth(sim.truth, (std::filesystem::path(a.out) / "truth.tsv").string());
    std::cerr << "wrote " << manifest << '\n';
    return 0;
}

struct EvaluateArgs {
    std::vector<std::string> reports;
    std::vector<std::string> truths;
    std::vector<std::string> labels;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.truths.size() != a.reports.size() && a.truths.size() != 1) {
        throw DomainError("give one --truth, or one per --report");
    }
    if (!a.labels.empty() && a.labels.size() != a.reports.size()) {
        throw DomainError("give one --label per --report");
    }
    std::string text = "run\tseed\tsetting\tpattern\tdropout\ttp\tfp\ttn\tfn\ttpr\tfpr\tf1\n";
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        const GroundTruth truth = read_ground_truth(a.truths.size() == 1 ? a.truths[0] : a.truths[i]);
        const DetectionReport report = read_report(a.reports[i]);
        const ConfusionCounts c = confusion(selected_ids(report), truth);
        const Metrics m = metrics(c);
        text += (a.labels.empty() ? a.reports[i] : a.labels[i]) + '\t' + std::to_string(truth.run.seed) + '\t' +
                std::to_string(truth.run.setting) + '\t' + truth.run.pattern + '\t' +
                format_double(truth.run.dropout) + '\t' + std::to_string(c.tp) + '\t' +
                std::to_string(c.fp) + '\t' + std::to_string(c.tn) + '\t' + std::to_string(c.fn) + '\t' +
                format_double(m.tpr) + '\t' + format_double(m.fpr) + '\t' + format_double(m.f1) + '\n';
    }
    write_atomically(a.out, text);
    return 0;
}

int cmd_stability(const std::vector<std::string>& reports, const std::string& out) {
    std::vector<std::set<std::string>> sets;
    for (const auto& r : reports) {
        sets.push_back(selected_ids(read_report(r)));
    }
    std::string text = "report_a\treport_b\tjaccard\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            text += reports[i] + '\t' + reports[j] + '\t' + format_double(jaccard(sets[i], sets[j])) + '\n';
        }
    }
    write_atomically(out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-sample spatially variable gene detection"};
    app.require_subcommand(1);

    DetectArgs det;
    auto* detect_cmd = app.add_subcommand("detect", "Fit every gene and write a detection report");
    detect_cmd->add_option("--manifest", det.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--out", det.out, "Report path")->required();
    detect_cmd->add_option("--degree", det.degree, "Basis degree 1..4 or auto")->capture_default_str();
    detect_cmd->add_option("--gamma2", det.gamma2, "Shared-indicator leak probability or auto")->capture_default_str();
    detect_cmd->add_option("--bfdr-level", det.bfdr_level, "Bayesian FDR level (default 0.05/(2G))");
    detect_cmd->add_option("--max-iter", det.max_iter, "Iteration limit per gene")->check(CLI::PositiveNumber)->capture_default_str();
    detect_cmd->add_option("--tol", det.tol, "Bound change for convergence")->check(CLI::PositiveNumber)->capture_default_str();
    detect_cmd->add_option("--workers", det.workers, "Worker threads (default MSVG_WORKERS or 1)")->check(CLI::PositiveNumber);
    detect_cmd->add_option("--seed", det.seed, "Base seed")->capture_default_str();
    detect_cmd->add_option("--min-spots-per-gene", det.min_spots)->capture_default_str();
    detect_cmd->add_option("--min-genes-per-spot", det.min_genes)->capture_default_str();
    detect_cmd->add_flag("--no-filter", det.no_filter, "Skip gene and spot filtering");

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Write a simulated dataset with ground truth");
    simulate_cmd->add_option("--out", sim.out, "Output directory")->required();
    simulate_cmd->add_option("--setting", sim.setting)->check(CLI::Range(1, 4))->capture_default_str();
    simulate_cmd->add_option("--pattern", sim.pattern)->capture_default_str();
    simulate_cmd->add_option("--dropout", sim.dropout)->check(CLI::Range(0.0, 0.999))->capture_default_str();
    simulate_cmd->add_option("--grid", sim.grid, "Lattice side length")->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--genes", sim.genes)->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--sv-genes", sim.sv_genes)->capture_default_str();
    simulate_cmd->add_option("--samples", sim.samples)->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--seed", sim.seed)->capture_default_str();
    simulate_cmd->add_option("--format", sim.format)->check(CLI::IsMember({"dense", "triplet"}))->capture_default_str();

    EvaluateArgs eval;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score reports against ground truth");
    evaluate_cmd->add_option("--report", eval.reports)->required();
    evaluate_cmd->add_option("--truth", eval.truths)->required();
    evaluate_cmd->add_option("--label", eval.labels, "Row label per report");
    evaluate_cmd->add_option("--out", eval.out, "Metrics TSV")->required();

    std::vector<std::string> stab_reports;
    std::string stab_out;
    auto* stability_cmd = app.add_subcommand("stability", "Pairwise Jaccard indices of selected sets");
    stability_cmd->add_option("--report", stab_reports)->required()->expected(2, -1);
    stability_cmd->add_option("--out", stab_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (detect_cmd->parsed()) {
            return cmd_detect(det);
        }
        if (simulate_cmd->parsed()) {
            return cmd_simulate(sim);
        }
        if (evaluate_cmd->parsed()) {
            return cmd_evaluate(eval);
        }
        if (stability_cmd->parsed()) {
            return cmd_stability(stab_reports, stab_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
