#pragma once

#include <Eigen/Dense>

namespace msvg {

/// Digamma function for x > 0. Throws DomainError otherwise.
double digamma(double x);

/// Trigamma function for x > 0.
double trigamma(double x);

/// Thread-safe log-gamma for x > 0.
double log_gamma(double x);

/// log B(a, b) for a, b > 0.
double log_beta(double a, double b);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

/// Logistic function 1 / (1 + exp(-x)), stable for large |x|.
double logistic(double x);

/**
 * Settings for the fixed-node quadrature used by `log_h_integral()`.
 *
 * The integral is computed after substituting u = log x, on a window
 * around the mode split into six Gauss-Legendre panels.
 */
struct QuadratureSpec {
    /// Total number of nodes, spread evenly across the six panels.
    int node_count = 96;

    /// Re-run with twice the nodes and throw if the two disagree.
    bool self_check = false;

    /// Relative tolerance for the self-check.
    double target_rel_tol = 1e-8;
};

/**
 * Log of
 * H(p, q, r, s, t) = int_0^inf x^p log(1 + r x)^q {x^x / Gamma(x)}^s exp(-t x) dx.
 *
 * @param p Power of x. The integral exists only when p + q + s > -1.
 * @param q Either 0 or 1.
 * @param r Positive scale inside the logarithm.
 * @param s Non-negative exponent of x^x / Gamma(x).
 * @param t Positive rate. When s > 0 the integral exists only for t > s.
 *
 * Throws DomainError for invalid arguments and NumericalError when the
 * integral diverges or the integrand cannot be represented.
 */
double log_h_integral(double p, int q, double r, double s, double t, const QuadratureSpec& spec = {});

/// exp(-c mu + c Sigma c' / 2), the mean of exp(-c theta) for theta ~ N(mu, Sigma).
double mvn_exp_neg_linear(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, const Eigen::RowVectorXd& c);

} // namespace msvg
