#include "msvg/dataio.hpp"
#include "msvg/error.hpp"
#include "msvg/evalmetrics.hpp"
#include "msvg/numerics.hpp"
#include "msvg/pipeline.hpp"
#include "msvg/selection.hpp"
#include "msvg/simgen.hpp"
#include "msvg/splinebasis.hpp"
#include "msvg/viengine.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace msvg;

namespace {

py::dict sample_dict(const SpatialSample& s) {
    py::dict d;
    d["sample_id"] = s.sample_id;
    d["counts"] = Eigen::MatrixXd(s.counts);
    d["coords"] = s.coords;
    d["covariates"] = s.covariates;
    d["covariate_names"] = s.covariate_names;
    d["spot_ids"] = s.spot_ids;
    d["gene_ids"] = s.gene_ids;
    return d;
}

py::dict report_dict(const DetectionReport& r) {
    py::list genes;
    for (const auto& d : r.decisions) {
        py::dict g;
        g["gene_id"] = d.gene_id;
        g["e_u1"] = d.e_u1;
        g["e_u2"] = d.e_u2;
        g["u_tilde"] = d.u_tilde;
        g["selected"] = d.selected;
        g["incl"] = d.incl;
        g["iterations"] = d.iterations;
        g["converged"] = d.converged;
        g["final_elbo"] = d.final_elbo;
        genes.append(g);
    }
    py::dict out;
    out["genes"] = genes;
    out["threshold_u0"] = r.threshold_u0;
    out["bfdr_level"] = r.bfdr_level;
    out["degree"] = r.degree;
    out["gamma2"] = r.gamma2;
    out["sample_ids"] = r.sample_ids;
    return out;
}

py::dict fit_result_dict(const GeneFitResult& r) {
    py::dict d;
    d["e_u"] = r.e_u;
    d["incl"] = r.incl;
    d["elbo_trace"] = r.elbo_trace;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["message"] = r.message;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-sample spatially variable gene detection";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("digamma", &digamma, py::arg("x"));
    m.def("trigamma", &trigamma, py::arg("x"));
    m.def(
        "log_h_integral",
        [](double p, int q, double r, double s, double t, int nodes) {
            QuadratureSpec spec;
            spec.node_count = nodes;
            return log_h_integral(p, q, r, s, t, spec);
        },
        py::arg("p"), py::arg("q"), py::arg("r"), py::arg("s"), py::arg("t"), py::arg("nodes") = 96,
        "log of the integral over x > 0 of x^p log(1 + r x)^q exp(-t x) (x^x / Gamma(x))^s");

    m.def("normalize_coords", &normalize_coords, py::arg("coords"));
    m.def(
        "eval_basis", [](int degree, double t) { return eval_basis(BasisSpec{degree}, t); }, py::arg("degree"),
        py::arg("t"));

    m.def("bfdr", &bfdr, py::arg("u_tilde"), py::arg("u0"));
    m.def("bfdr_threshold", &bfdr_threshold, py::arg("u_tilde"), py::arg("level"));
    m.def("select_genes", &select_genes, py::arg("u_tilde"), py::arg("u0"));
    m.def("default_bfdr_level", &default_bfdr_level, py::arg("n_genes"));

    m.def(
        "fit_gene",
        [](const std::vector<Eigen::VectorXd>& counts, const std::vector<Eigen::MatrixXd>& designs, int degree,
           int n_covariates, double gamma2, int max_iter, double tol) {
            GeneData data;
            data.counts = counts;
            data.designs = designs;
            data.layout = CoefLayout{degree, n_covariates};
            Hyperparameters hp = default_hyperparameters(degree, counts.size());
            if (gamma2 > 0.0) {
                hp.gamma2 = gamma2;
            }
            FitOptions opts;
            opts.max_iter = max_iter;
            opts.elbo_tol = tol;
            GeneFitResult r;
            {
                py::gil_scoped_release release;
                r = fit_gene(data, hp, opts);
            }
            return fit_result_dict(r);
        },
        py::arg("counts"), py::arg("designs"), py::arg("degree"), py::arg("n_covariates"), py::arg("gamma2") = 0.0,
        py::arg("max_iter") = 500, py::arg("tol") = 1e-2,
        "Fits one gene. designs[m] has columns [1, basis(s1), basis(s2), covariates].");

    m.def(
        "simulate",
        [](std::size_t samples, std::size_t grid, std::size_t genes, std::size_t sv_genes, const std::string& pattern,
           int setting, double dropout, std::uint64_t seed, const std::string& out_dir) {
            SimConfig cfg;
            cfg.n_samples = samples;
            cfg.grid_rows = cfg.grid_cols = grid;
            cfg.n_genes = genes;
            cfg.n_sv = sv_genes;
            cfg.pattern = parse_pattern(pattern);
            cfg.setting = setting;
            cfg.dropout = dropout;
            cfg.seed = seed;
            cfg.validate();
            const SimulatedData sim = generate(cfg);
            py::list out_samples;
            for (const auto& s : sim.dataset.samples) {
                out_samples.append(sample_dict(s));
            }
            py::dict truth;
            truth["gene_ids"] = sim.truth.gene_ids;
            truth["is_sv"] = sim.truth.is_sv;
            truth["beta0"] = sim.truth.beta0;
            py::dict out;
            out["samples"] = out_samples;
            out["gene_ids"] = sim.dataset.gene_ids;
            out["truth"] = truth;
            if (!out_dir.empty()) {
                out["manifest"] = write_dataset(sim.dataset, out_dir);
                write_ground_truth(sim.truth, out_dir + "/truth.tsv");
            }
            return out;
        },
        py::arg("samples") = 4, py::arg("grid") = 16, py::arg("genes") = 50, py::arg("sv_genes") = 5,
        py::arg("pattern") = "linear", py::arg("setting") = 1, py::arg("dropout") = 0.3, py::arg("seed") = 1,
        py::arg("out") = "", "Simulates a dataset; a non-empty `out` also writes it with its ground truth.");

    m.def(
        "detect",
        [](const std::string& manifest, int degree, double gamma2, double bfdr_level, int workers, bool filter,
           std::uint64_t seed) {
            const MultiSampleDataset ds = load_dataset(manifest);
            DetectConfig cfg;
            cfg.degree = degree;
            cfg.gamma2 = gamma2;
            cfg.bfdr_level = bfdr_level;
            cfg.workers = workers;
            cfg.filter = filter;
            cfg.seed = seed;
            DetectOutput out;
            {
                py::gil_scoped_release release;
                out = detect(ds, cfg);
            }
            py::dict d = report_dict(out.report);
            d["failed"] = out.failed;
            d["warnings"] = out.warnings;
            return d;
        },
        py::arg("manifest"), py::arg("degree") = 0, py::arg("gamma2") = 0.0, py::arg("bfdr_level") = 0.0,
        py::arg("workers") = 1, py::arg("filter") = true, py::arg("seed") = 1,
        "Runs detection on a manifest; degree 0 selects it automatically.");

    m.def("read_report", [](const std::string& path) { return report_dict(read_report(path)); }, py::arg("path"));

    m.def(
        "jaccard",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
            return jaccard({a.begin(), a.end()}, {b.begin(), b.end()});
        },
        py::arg("a"), py::arg("b"));
}
