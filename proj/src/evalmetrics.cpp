#include "msvg/evalmetrics.hpp"

#include "msvg/error.hpp"

#include <unordered_set>

namespace msvg {

namespace {

double ratio(double num, double den) {
    return den > 0.0 ? num / den : 0.0;
}

} // namespace

ConfusionCounts confusion(const std::set<std::string>& selected, const GroundTruth& truth) {
    std::unordered_set<std::string> universe(truth.gene_ids.begin(), truth.gene_ids.end());
    for (const auto& id : selected) {
        if (!universe.contains(id)) {
            throw DataError("confusion: unknown gene '" + id + "'");
        }
    }
    ConfusionCounts c;
    for (std::size_t g = 0; g < truth.gene_ids.size(); ++g) {
        const bool chosen = selected.contains(truth.gene_ids[g]);
        if (truth.is_sv[g]) {
            chosen ? ++c.tp : ++c.fn;
        } else {
            chosen ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

Metrics metrics(const ConfusionCounts& c) {
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto tn = static_cast<double>(c.tn);
    const auto fn = static_cast<double>(c.fn);
    return {ratio(tp, tp + fn), ratio(fp, fp + tn), ratio(2.0 * tp, 2.0 * tp + fp + fn)};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& id : a) {
        common += b.contains(id) ? 1 : 0;
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

} // namespace msvg
