#pragma once

#include "msvg/simgen.hpp"

#include <set>
#include <string>
#include <vector>

namespace msvg {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

struct Metrics {
    double tpr = 0.0;
    double fpr = 0.0;
    double f1 = 0.0;
};

/// Throws DataError if a selected gene is not in the truth.
ConfusionCounts confusion(const std::set<std::string>& selected, const GroundTruth& truth);

/// Ratios with 0/0 taken as 0.
Metrics metrics(const ConfusionCounts& c);

/// |A and B| / |A or B|, with two empty sets scoring 1.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

} // namespace msvg
