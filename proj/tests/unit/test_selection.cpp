#include "msvg/selection.hpp"
#include "msvg/viengine.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace msvg;

namespace {

std::set<std::size_t> chosen(const std::vector<double>& u, double u0) {
    const std::vector<bool> flags = select_genes(u, u0);
    std::set<std::size_t> out;
    for (std::size_t g = 0; g < flags.size(); ++g) {
        if (flags[g]) {
            out.insert(g);
        }
    }
    return out;
}

// Brute force over every candidate threshold.
double threshold_oracle(const std::vector<double>& u, double level) {
    std::vector<double> cand{level};
    for (double v : u) {
        cand.push_back(1.0 - v);
    }
    double best = 0.0;
    for (double c : cand) {
        double sum = 0.0;
        int n = 0;
        for (double v : u) {
            if (1.0 - v < c) {
                sum += 1.0 - v;
                ++n;
            }
        }
        if (n > 0 && sum / n <= level) {
            best = std::max(best, c);
        }
    }
    return best;
}

} // namespace

TEST_CASE("compute_u_tilde") {
    CHECK(compute_u_tilde(0.97, 0.20) == 0.97);
    CHECK(compute_u_tilde(0.0, 0.0) == 0.0);
    CHECK(compute_u_tilde(0.5, 0.5) == 0.5);
    GeneFitResult r;
    r.e_u = {0.1, 0.8};
    CHECK(compute_u_tilde(r) == 0.8);
}

TEST_CASE("bfdr") {
    CHECK(bfdr({0.99, 0.97, 0.6}, 0.05) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(bfdr({1.0, 1.0, 1.0}, 0.3) == 0.0);
    CHECK(bfdr({0.5}, 0.1) == 0.0);
}

TEST_CASE("bfdr_threshold") {
    const double level = 0.05 / 6.0;
    const std::vector<double> u{0.999, 0.998, 0.5};
    const double u0 = bfdr_threshold(u, level);
    CHECK(chosen(u, u0) == std::set<std::size_t>{0, 1});
    CHECK(bfdr(u, u0) == doctest::Approx(0.0015).epsilon(1e-9));
    CHECK(bfdr(u, u0) <= level);

    CHECK(bfdr_threshold({0.0, 0.0, 0.0}, 0.01) == 0.0);
    CHECK(chosen({0.0, 0.0, 0.0}, 0.0).empty());
    const double single = bfdr_threshold({1.0}, 0.025);
    CHECK(chosen({1.0}, single).size() == 1);
    CHECK(default_bfdr_level(200) == doctest::Approx(0.05 / 400));
}

TEST_CASE("bfdr_threshold against brute force") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> u(1 + rep % 40);
        for (double& v : u) {
            const double x = unif(rng);
            v = x < 0.5 ? 1.0 - 1e-3 * unif(rng) : unif(rng);
        }
        const double level = 0.001 + 0.05 * unif(rng);
        CHECK(bfdr_threshold(u, level) == threshold_oracle(u, level));
    }
}

TEST_CASE("selection is monotone and BFDR non-decreasing") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> u(60);
    for (double& v : u) {
        v = unif(rng);
    }
    std::vector<double> grid;
    for (double v : u) {
        grid.push_back(1.0 - v);
    }
    std::sort(grid.begin(), grid.end());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const auto small = chosen(u, grid[i - 1]);
        const auto large = chosen(u, grid[i]);
        CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
        CHECK(bfdr(u, grid[i - 1]) <= bfdr(u, grid[i]));
    }
}

TEST_CASE("selection is invariant to gene order") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<GeneFitResult> results(30);
    std::vector<std::string> ids;
    for (std::size_t g = 0; g < results.size(); ++g) {
        results[g].e_u = {g % 3 == 0 ? 1.0 - 1e-4 * unif(rng) : unif(rng), unif(rng) * 0.5};
        results[g].incl = {{0.5, 0.5}};
        ids.push_back("g" + std::to_string(g));
    }
    std::vector<std::size_t> perm(results.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = i;
    }
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<GeneFitResult> shuffled;
    std::vector<std::string> shuffled_ids;
    for (std::size_t i : perm) {
        shuffled.push_back(results[i]);
        shuffled_ids.push_back(ids[i]);
    }
    const DetectionReport a = make_report(ids, results, 0.0, 3, 0.01, {"m1"});
    const DetectionReport b = make_report(shuffled_ids, shuffled, 0.0, 3, 0.01, {"m1"});
    std::set<std::string> sa;
    std::set<std::string> sb;
    for (const auto& d : a.decisions) {
        if (d.selected) {
            sa.insert(d.gene_id);
        }
    }
    for (const auto& d : b.decisions) {
        if (d.selected) {
            sb.insert(d.gene_id);
        }
    }
    CHECK(!sa.empty());
    CHECK(sa == sb);
    CHECK(a.threshold_u0 == b.threshold_u0);
    CHECK(b.decisions[0].gene_id == shuffled_ids[0]);
    CHECK(a.bfdr_level == doctest::Approx(0.05 / 60));
}
