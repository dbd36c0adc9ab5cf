#include "tmpdir.hpp"

#include "msvg/error.hpp"
#include "msvg/simgen.hpp"
#include "msvg/splinebasis.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace msvg;

namespace {

SimConfig small_config(std::uint64_t seed) {
    SimConfig c;
    c.n_samples = 2;
    c.grid_rows = c.grid_cols = 12;
    c.n_genes = 40;
    c.n_sv = 10;
    c.seed = seed;
    return c;
}

double zero_fraction(const CountMatrix& counts, Eigen::Index g) {
    return static_cast<double>((counts.row(g).array() == 0.0).count()) / static_cast<double>(counts.cols());
}

// Residual sum of squares of least squares of y on X.
double rss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    return (y - X * beta).squaredNorm();
}

} // namespace

TEST_CASE("spatial_effect closed forms") {
    CHECK(spatial_effect(PatternKind::linear, 0.8, 1.0) == doctest::Approx(0.8));
    CHECK(spatial_effect(PatternKind::periodic, 1.0, 0.5) == doctest::Approx(-1.0));
    CHECK(std::abs(spatial_effect(PatternKind::poly1, 1.0, 0.8)) < 1e-12);
    CHECK(spatial_effect(PatternKind::none, 0.0, 1.3) == 0.0);
    CHECK(spatial_effect(PatternKind::linear_periodic, 1.0, 0.5, 0) == doctest::Approx(0.5));
    CHECK(spatial_effect(PatternKind::linear_periodic, 1.0, 0.5, 1) == doctest::Approx(-1.0));
    CHECK(parse_pattern(pattern_name(PatternKind::focal_periodic)) == PatternKind::focal_periodic);
    CHECK_THROWS_AS(parse_pattern("spiral"), DomainError);
    CHECK(strength_tiers(PatternKind::linear) == std::array<double, 4>{0.8, 0.5, 0.2, 0.05});
}

TEST_CASE("config validation") {
    SimConfig c = small_config(1);
    c.n_sv = 41;
    CHECK_THROWS_AS(generate(c), DomainError);
    c = small_config(1);
    c.dropout = 1.0;
    CHECK_THROWS_AS(generate(c), DomainError);
    c = small_config(1);
    c.region_dirichlet[2][0] = 0.0;
    CHECK_THROWS_AS(generate(c), DomainError);
}

TEST_CASE("a fixed seed reproduces the data") {
    const SimulatedData a = generate(small_config(5));
    const SimulatedData b = generate(small_config(5));
    const SimulatedData c = generate(small_config(6));
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(a.dataset.samples[m].counts == b.dataset.samples[m].counts);
        CHECK(a.dataset.samples[m].covariates == b.dataset.samples[m].covariates);
    }
    CHECK(a.dataset.samples[0].counts != c.dataset.samples[0].counts);
    CHECK(a.truth.run.seed == 5);
}

TEST_CASE("layout and ground truth") {
    const SimulatedData d = generate(small_config(2));
    CHECK(d.dataset.n_samples() == 2);
    CHECK(d.dataset.n_genes() == 40);
    CHECK(std::count(d.truth.is_sv.begin(), d.truth.is_sv.end(), true) == 10);
    for (const auto& s : d.dataset.samples) {
        CHECK(s.n_spots() == 144);
        CHECK(s.n_covariates() == 6);
        for (Eigen::Index i = 0; i < s.covariates.rows(); ++i) {
            CHECK(std::abs(s.covariates.row(i).sum() - 1.0) < 1e-12);
            CHECK(s.covariates.row(i).minCoeff() >= 0.0);
        }
        CHECK((s.counts.array() >= 0.0).all());
        CHECK((s.counts.array() == s.counts.array().round()).all());
    }
    for (std::size_t g = 0; g < 40; ++g) {
        if (!d.truth.is_sv[g]) {
            CHECK(d.truth.pattern[g] == PatternKind::none);
            CHECK(d.truth.beta0[g][0] == 0.0);
            CHECK(d.truth.beta0[g][1] == 0.0);
        } else {
            CHECK(d.truth.beta0[g][0] == 0.8);
            CHECK(d.truth.beta0[g][1] == 0.5);
        }
    }
}

TEST_CASE("dropout sets a floor on the zero rate") {
    SimConfig c = small_config(3);
    c.dropout = 0.9;
    const SimulatedData heavy = generate(c);
    c.dropout = 0.3;
    c.n_samples = 1;
    c.grid_rows = c.grid_cols = 32;
    const SimulatedData mid = generate(c);
    // Per gene the dropout count is binomial; allow four standard errors.
    const double slack = 4.0 * std::sqrt(0.9 * 0.1 / 144.0);
    for (Eigen::Index g = 0; g < 40; ++g) {
        CHECK(zero_fraction(heavy.dataset.samples[0].counts, g) >= 0.9 - slack);
    }
    // Pooled over genes the same floor holds to a much tighter binomial bound.
    double heavy_mean = 0.0;
    double mid_mean = 0.0;
    for (Eigen::Index g = 0; g < 40; ++g) {
        heavy_mean += zero_fraction(heavy.dataset.samples[0].counts, g) / 40;
        mid_mean += zero_fraction(mid.dataset.samples[0].counts, g) / 40;
    }
    CHECK(heavy_mean >= 0.9 - 4.0 * std::sqrt(0.9 * 0.1 / (40.0 * 144.0)));
    CHECK(mid_mean >= 0.3 - 4.0 * std::sqrt(0.3 * 0.7 / (40.0 * 1024.0)));
}

TEST_CASE("null genes carry little spatial signal") {
    SimConfig c;
    c.n_samples = 1;
    c.grid_rows = c.grid_cols = 32;
    c.n_genes = 101;
    c.n_sv = 0;
    c.dropout = 0.0;
    c.seed = 8;
    const SimulatedData d = generate(c);
    SpatialSample s = d.dataset.samples[0];
    s.coords = normalize_coords(s.coords);
    const Eigen::MatrixXd full = build_design(s, BasisSpec{3});
    Eigen::MatrixXd reduced(full.rows(), 1 + s.n_covariates());
    reduced << full.col(0), full.rightCols(static_cast<Eigen::Index>(s.n_covariates()));
    std::vector<double> r2;
    for (Eigen::Index g = 0; g < s.counts.rows(); ++g) {
        const Eigen::VectorXd y = (s.counts.row(g).transpose().array() + 1.0).log();
        const double base = rss(reduced, y);
        r2.push_back(1.0 - rss(full, y) / base);
    }
    std::nth_element(r2.begin(), r2.begin() + 50, r2.end());
    CHECK(r2[50] < 0.05);
}

TEST_CASE("ground truth round-trips") {
    msvg_test::TempDir dir("truth");
    SimConfig c = small_config(4);
    c.pattern = PatternKind::focal;
    c.setting = 3;
    const SimulatedData d = generate(c);
    write_ground_truth(d.truth, dir.file("truth.tsv"));
    const GroundTruth back = read_ground_truth(dir.file("truth.tsv"));
    CHECK(back.gene_ids == d.truth.gene_ids);
    CHECK(back.is_sv == d.truth.is_sv);
    CHECK(back.pattern == d.truth.pattern);
    CHECK(back.beta0 == d.truth.beta0);
    CHECK(back.run.seed == 4);
    CHECK(back.run.setting == 3);
    CHECK(back.run.pattern == "focal");
    CHECK(back.run.dropout == 0.3);
    CHECK_THROWS_AS(read_ground_truth(dir.file("missing.tsv")), IoError);
}

TEST_CASE("nngp genes") {
    SimConfig c = small_config(9);
    c.pattern = PatternKind::nngp;
    const SimulatedData d = generate(c);
    CHECK(d.truth.pattern[0] == PatternKind::nngp);
    CHECK(d.truth.pattern[39] == PatternKind::none);
    for (const auto& s : d.dataset.samples) {
        CHECK(s.counts.allFinite());
        CHECK(s.counts.sum() > 0.0);
    }
}
