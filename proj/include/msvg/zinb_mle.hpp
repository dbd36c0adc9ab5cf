#pragma once

#include <Eigen/Dense>

namespace msvg {

struct ZinbMleOptions {
    int max_iter = 200;
    double gradient_tol = 1e-5;
};

struct ZinbMleFit {
    /// Log-likelihood at the optimum.
    double log_likelihood = 0.0;
    double dropout = 0.0;
    double dispersion = 1.0;
    Eigen::VectorXd coef;
    int iterations = 0;
    bool converged = false;
};

/**
 * Maximum-likelihood fit of a zero-inflated negative binomial regression
 * with log-mean `design * coef`, dropout probability and dispersion.
 * Uses BFGS on (logit dropout, log dispersion, coef).
 */
ZinbMleFit fit_zinb_mle(const Eigen::VectorXd& counts, const Eigen::MatrixXd& design, const ZinbMleOptions& opts = {});

/// Log-likelihood and its gradient at packed parameters (logit dropout, log dispersion, coef).
double zinb_log_likelihood(const Eigen::VectorXd& counts, const Eigen::MatrixXd& design, const Eigen::VectorXd& params,
                           Eigen::VectorXd* gradient = nullptr);

} // namespace msvg
