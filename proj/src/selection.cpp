#include "msvg/selection.hpp"

#include "msvg/error.hpp"
#include "msvg/viengine.hpp"

#include <algorithm>
#include <cmath>

namespace msvg {

double compute_u_tilde(double e_u1, double e_u2) {
    return std::max(e_u1, e_u2);
}

double compute_u_tilde(const GeneFitResult& result) {
    return compute_u_tilde(result.e_u[0], result.e_u[1]);
}

double bfdr(const std::vector<double>& u_tilde, double u0) {
    double numerator = 0.0;
    std::size_t count = 0;
    for (double u : u_tilde) {
        const double miss = 1.0 - u;
        if (miss < u0) {
            numerator += miss;
            ++count;
        }
    }
    return count == 0 ? 0.0 : numerator / static_cast<double>(count);
}

double bfdr_threshold(const std::vector<double>& u_tilde, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("bfdr_threshold: level must lie in (0, 1)");
    }
    std::vector<double> miss;
    miss.reserve(u_tilde.size());
    for (double u : u_tilde) {
        miss.push_back(1.0 - u);
    }
    std::sort(miss.begin(), miss.end());

    std::vector<double> candidates = miss;
    candidates.push_back(level);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Walk candidates upward, keeping a running mean of the selected misses.
    double best = 0.0;
    std::size_t taken = 0;
    double sum = 0.0;
    for (double u0 : candidates) {
        while (taken < miss.size() && miss[taken] < u0) {
            sum += miss[taken];
            ++taken;
        }
        if (taken == 0) {
            continue;
        }
        if (sum / static_cast<double>(taken) <= level) {
            best = u0;
        }
    }
    return best;
}

double default_bfdr_level(std::size_t n_genes) {
    return 0.05 / (2.0 * static_cast<double>(std::max<std::size_t>(n_genes, 1)));
}

std::vector<bool> select_genes(const std::vector<double>& u_tilde, double u0) {
    std::vector<bool> out(u_tilde.size());
    for (std::size_t g = 0; g < u_tilde.size(); ++g) {
        out[g] = 1.0 - u_tilde[g] < u0;
    }
    return out;
}

DetectionReport make_report(const std::vector<std::string>& gene_ids, const std::vector<GeneFitResult>& results,
                            double level, int degree, double gamma2, const std::vector<std::string>& sample_ids) {
    if (gene_ids.size() != results.size()) {
        throw DomainError("make_report: gene ids and results disagree");
    }
    DetectionReport report;
    report.degree = degree;
    report.gamma2 = gamma2;
    report.sample_ids = sample_ids;
    report.bfdr_level = level > 0.0 ? level : default_bfdr_level(gene_ids.size());
    std::vector<double> scores;
    for (std::size_t g = 0; g < results.size(); ++g) {
        GeneDecision d;
        d.gene_id = gene_ids[g];
        d.e_u1 = results[g].e_u[0];
        d.e_u2 = results[g].e_u[1];
        d.u_tilde = compute_u_tilde(results[g]);
        d.incl = results[g].incl;
        d.iterations = results[g].iterations;
        d.converged = results[g].converged;
        d.final_elbo = results[g].elbo_trace.empty() ? std::nan("") : results[g].elbo_trace.back();
        scores.push_back(d.u_tilde);
        report.decisions.push_back(std::move(d));
    }
    report.threshold_u0 = scores.empty() ? 0.0 : bfdr_threshold(scores, report.bfdr_level);
    const auto chosen = select_genes(scores, report.threshold_u0);
    for (std::size_t g = 0; g < chosen.size(); ++g) {
        report.decisions[g].selected = chosen[g];
    }
    return report;
}

} // namespace msvg
