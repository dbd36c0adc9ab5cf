#include "msvg/numerics.hpp"

#include "msvg/error.hpp"

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_integration.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace msvg {

double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("digamma: argument must be positive and finite, got " + std::to_string(x));
    }
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Asymptotic series with Bernoulli-number coefficients.
    const double series = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0
                          - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    return shift + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("trigamma: argument must be positive and finite, got " + std::to_string(x));
    }
    double shift = 0.0;
    while (x < 10.0) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series = inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0
                          - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))))));
    return shift + series;
}

double log_gamma(double x) {
    if (!(x > 0.0)) {
        throw DomainError("log_gamma: argument must be positive, got " + std::to_string(x));
    }
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

double log_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("log_beta: arguments must be positive");
    }
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) {
        return b;
    }
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double mvn_exp_neg_linear(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, const Eigen::RowVectorXd& c) {
    if (c.size() != mu.size() || Sigma.rows() != mu.size() || Sigma.cols() != mu.size()) {
        throw DomainError("mvn_exp_neg_linear: dimension mismatch");
    }
    const double quad = (c * Sigma * c.transpose())(0, 0);
    return std::exp(-c.dot(mu) + 0.5 * quad);
}

namespace {

// Gauss-Legendre tables are shared across threads; GSL fills them once per size.
const gsl_integration_glfixed_table* gauss_legendre_table(int n) {
    static std::mutex lock;
    static std::map<int, std::unique_ptr<gsl_integration_glfixed_table, void (*)(gsl_integration_glfixed_table*)>> cache;
    std::lock_guard<std::mutex> guard(lock);
    auto it = cache.find(n);
    if (it == cache.end()) {
        gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
        if (table == nullptr) {
            throw NumericalError("failed to allocate Gauss-Legendre table");
        }
        it = cache.emplace(n, std::unique_ptr<gsl_integration_glfixed_table, void (*)(gsl_integration_glfixed_table*)>(
                                  table, gsl_integration_glfixed_table_free)).first;
    }
    return it->second.get();
}

constexpr double lower_floor = -60.0;
constexpr double scan_upper = 80.0;
constexpr double hard_upper = 300.0;
constexpr double window_depth = 46.0;

// Log-integrand after the substitution x = exp(u), including the Jacobian.
struct LogIntegrand {
    double p;
    int q;
    double r;
    double s;
    double t;

    double operator()(double u) const {
        const double x = std::exp(u);
        double v = (p + 1.0) * u - t * x;
        if (q == 1) {
            v += std::log(std::log1p(r * x));
        }
        if (s > 0.0) {
            int sign = 0;
            v += s * (x * u - ::lgamma_r(x, &sign));
        }
        return v;
    }
};

// Walks away from the mode until the log-integrand drops below `level`,
// then bisects. Returns the limit itself if the level is never reached.
double level_crossing(const LogIntegrand& f, double mode, double level, double step, double direction, double limit) {
    double inside = mode;
    double outside = mode;
    bool found = false;
    for (int i = 0; i < 200; ++i) {
        outside = mode + direction * step;
        if (direction < 0 ? outside <= limit : outside >= limit) {
            outside = limit;
            if (f(limit) >= level) {
                return limit;
            }
            found = true;
            break;
        }
        if (f(outside) < level) {
            found = true;
            break;
        }
        inside = outside;
        step *= 2.0;
    }
    if (!found) {
        return outside;
    }
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (inside + outside);
        if (f(mid) >= level) {
            inside = mid;
        } else {
            outside = mid;
        }
        if (std::abs(outside - inside) < 1e-6) {
            break;
        }
    }
    return 0.5 * (inside + outside);
}

double log_h_impl(const LogIntegrand& f, int nodes_per_panel) {
    // Coarse scan for the mode; the integrand is unimodal in u.
    double best_u = lower_floor;
    double best_f = -std::numeric_limits<double>::infinity();
    for (double u = lower_floor; u <= scan_upper; u += 1.0) {
        const double v = f(u);
        if (std::isnan(v)) {
            throw NumericalError("h_integral: integrand is NaN");
        }
        if (v > best_f) {
            best_f = v;
            best_u = u;
        }
    }
    if (!std::isfinite(best_f)) {
        throw NumericalError("h_integral: integrand not representable");
    }
    if (best_u >= scan_upper) {
        throw NumericalError("h_integral: integrand mass beyond representable range");
    }
    const double lo = std::max(lower_floor, best_u - 1.0);
    const double hi = best_u + 1.0;
    std::uintmax_t max_iter = 100;
    const auto refined = boost::math::tools::brent_find_minima([&](double u) { return -f(u); }, lo, hi, 30, max_iter);
    double mode = refined.first;
    double f_max = -refined.second;
    if (best_f > f_max) {
        mode = best_u;
        f_max = best_f;
    }

    const double h = 1e-3;
    const double curvature = (f(mode + h) - 2.0 * f_max + f(mode - h)) / (h * h);
    const double width = curvature < 0.0 ? std::min(1.0, 1.0 / std::sqrt(-curvature)) : 1.0;

    constexpr std::array<double, 3> levels = {window_depth, 16.0, 4.0};
    std::array<double, 7> edges{};
    for (std::size_t i = 0; i < levels.size(); ++i) {
        edges[i] = level_crossing(f, mode, f_max - levels[i], width, -1.0, lower_floor);
        edges[6 - i] = level_crossing(f, mode, f_max - levels[i], width, 1.0, hard_upper);
    }
    edges[3] = mode;
    if (edges[6] >= hard_upper) {
        throw NumericalError("h_integral: integral diverges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        edges[i] = std::max(edges[i], edges[i - 1]);
    }

    const gsl_integration_glfixed_table* table = gauss_legendre_table(nodes_per_panel);
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(6 * nodes_per_panel + 1));
    for (std::size_t panel = 0; panel + 1 < edges.size(); ++panel) {
        const double a = edges[panel];
        const double b = edges[panel + 1];
        if (b - a <= 0.0) {
            continue;
        }
        for (int i = 0; i < nodes_per_panel; ++i) {
            double node = 0.0;
            double weight = 0.0;
            gsl_integration_glfixed_point(a, b, static_cast<size_t>(i), &node, &weight, table);
            terms.push_back(std::log(weight) + f(node));
        }
    }
    if (edges[0] <= lower_floor) {
        // Below the floor the integrand is exp((p + q + s + 1) u) up to a constant.
        const double slope = f.p + f.q + f.s + 1.0;
        terms.push_back(f(lower_floor) - std::log(slope));
    }
    double top = -std::numeric_limits<double>::infinity();
    for (double v : terms) {
        top = std::max(top, v);
    }
    double acc = 0.0;
    for (double v : terms) {
        acc += std::exp(v - top);
    }
    const double out = top + std::log(acc);
    if (!std::isfinite(out)) {
        throw NumericalError("h_integral: non-finite result");
    }
    return out;
}

} // namespace

double log_h_integral(double p, int q, double r, double s, double t, const QuadratureSpec& spec) {
    if (q != 0 && q != 1) {
        throw DomainError("h_integral: q must be 0 or 1");
    }
    if (!(r > 0.0) || !(t > 0.0) || !(s >= 0.0) || !std::isfinite(p) || !std::isfinite(s) || !std::isfinite(t)) {
        throw DomainError("h_integral: require r > 0, t > 0, s >= 0 and finite arguments");
    }
    if (!(p + q + s > -1.0)) {
        throw NumericalError("h_integral: integral diverges at zero (p + q + s <= -1)");
    }
    if (s > 0.0 && !(t > s)) {
        throw NumericalError("h_integral: integral diverges at infinity (t <= s)");
    }
    if (spec.node_count < 16) {
        throw DomainError("h_integral: node_count must be at least 16");
    }
    const LogIntegrand f{p, q, r, s, t};
    const int per_panel = spec.node_count / 6;
    const double value = log_h_impl(f, per_panel);
    if (spec.self_check) {
        const double check = log_h_impl(f, 2 * per_panel);
        if (std::abs(std::expm1(value - check)) > spec.target_rel_tol) {
            throw NumericalError("h_integral: self-check failed");
        }
    }
    return value;
}

} // namespace msvg
