#include "msvg/error.hpp"
#include "msvg/evalmetrics.hpp"

#include <doctest.h>

using namespace msvg;

namespace {

GroundTruth truth_of(std::size_t genes, std::size_t sv) {
    GroundTruth t;
    for (std::size_t g = 0; g < genes; ++g) {
        t.gene_ids.push_back("g" + std::to_string(g));
        t.is_sv.push_back(g < sv);
    }
    return t;
}

std::set<std::string> range(std::size_t lo, std::size_t hi) {
    std::set<std::string> s;
    for (std::size_t g = lo; g < hi; ++g) {
        s.insert("g" + std::to_string(g));
    }
    return s;
}

} // namespace

TEST_CASE("confusion counts") {
    const GroundTruth t = truth_of(200, 20);
    const ConfusionCounts perfect = confusion(range(0, 20), t);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);
    CHECK(perfect.tp == 20);
    const ConfusionCounts empty = confusion({}, t);
    CHECK(empty.tp == 0);
    CHECK(empty.fn == 20);
    CHECK(empty.tn == 180);
    CHECK(empty.fp == 0);
    const ConfusionCounts comp = confusion(range(20, 200), t);
    CHECK(comp.tp == 0);
    CHECK(comp.fp == 180);
    CHECK(comp.fn == 20);
    CHECK(comp.tn == 0);
    CHECK_THROWS_AS(confusion({"nope"}, t), DataError);
}

TEST_CASE("metrics") {
    const Metrics m = metrics(ConfusionCounts{8, 1, 189, 2});
    CHECK(m.tpr == doctest::Approx(0.8));
    CHECK(m.fpr == doctest::Approx(1.0 / 190.0));
    CHECK(m.f1 == doctest::Approx(16.0 / 19.0));
    const Metrics z = metrics(ConfusionCounts{});
    CHECK(z.tpr == 0.0);
    CHECK(z.fpr == 0.0);
    CHECK(z.f1 == 0.0);
}

TEST_CASE("metrics are invariant to relabeling") {
    GroundTruth t = truth_of(50, 10);
    const Metrics a = metrics(confusion(range(5, 15), t));
    GroundTruth r = t;
    std::set<std::string> sel;
    for (auto& id : r.gene_ids) {
        id = "x_" + id;
    }
    for (const auto& id : range(5, 15)) {
        sel.insert("x_" + id);
    }
    const Metrics b = metrics(confusion(sel, r));
    CHECK(a.f1 == b.f1);
    CHECK(a.tpr == b.tpr);
    CHECK(a.fpr == b.fpr);
    CHECK(a.f1 >= 0.0);
    CHECK(a.f1 <= 1.0);
}

TEST_CASE("jaccard") {
    CHECK(jaccard({}, {}) == 1.0);
    CHECK(jaccard({"a"}, {}) == 0.0);
    CHECK(jaccard({"a", "b", "c"}, {"b", "c", "d"}) == doctest::Approx(0.5));
    CHECK(jaccard({"a", "b"}, {"b"}) == jaccard({"b"}, {"a", "b"}));
    CHECK(jaccard(range(0, 10), range(0, 10)) == 1.0);
}
