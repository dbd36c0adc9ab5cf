#pragma once

#include "msvg/numerics.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace msvg {

/**
 * Fixed prior constants.
 *
 * `a_pi`, `b_pi`: Beta prior of the dropout probability.
 * `a_phi`, `b_phi`: Gamma prior of the dispersion (shape, rate).
 * `var_intercept`, `var_covariate`: Normal prior variances of the intercept and covariate effects.
 * `spike_var`: variance of the spike component of the spatial coefficients.
 * `gamma2`: probability that a sample-level indicator is on when the shared indicator is off.
 * `slab_scale`: Half-Cauchy scales of the slab standard deviation, one per axis.
 * `c_p`, `d_p`, `c_q`, `d_q`: Beta hyperpriors of the shared inclusion probabilities.
 */
struct Hyperparameters {
    double a_pi = 1.0;
    double b_pi = 1.0;
    double a_phi = 0.001;
    double b_phi = 0.001;
    double var_intercept = 1.0;
    double var_covariate = 1.0;
    double spike_var = 0.01;
    double gamma2 = 0.01;
    std::array<double, 2> slab_scale = {0.04, 0.04};
    double c_p = 0.2;
    double d_p = 1.8;
    double c_q = 1.0;
    double d_q = 1.0;

    /// Throws DomainError if any constant is out of range.
    void validate() const;
};

/// Default Half-Cauchy scale for spline degree 1..4.
double default_slab_scale(int degree);

/// Default `gamma2` for the number of samples.
double default_gamma2(std::size_t n_samples);

/// Defaults for a given spline degree and sample count.
Hyperparameters default_hyperparameters(int degree, std::size_t n_samples);

/// Layout of the regression coefficients: [intercept, axis-1 block, axis-2 block, covariates].
struct CoefLayout {
    int basis_size = 0;
    int n_covariates = 0;

    int dim() const { return 1 + 2 * basis_size + n_covariates; }
    int block_start(int axis) const { return 1 + axis * basis_size; }
};

/**
 * Variational factors for one sample.
 *
 * Latent expression g_i ~ Gamma(g_shape_i, g_rate_i); dropout indicator
 * P(r_i = 1) = dropout_prob_i; regression coefficients ~ N(coef_mean, coef_cov);
 * dispersion with density proportional to
 * phi^(a_phi - 1) {phi^phi / Gamma(phi)}^n exp(-phi_rate phi).
 * For each axis k: slab precision ~ Gamma(prec_shape_k, prec_rate_k),
 * its mixing variable ~ Gamma(1, mix_rate_k) and inclusion probability incl_k.
 */
struct SampleState {
    Eigen::VectorXd g_shape;
    Eigen::VectorXd g_rate;
    Eigen::VectorXd dropout_prob;
    Eigen::VectorXd coef_mean;
    Eigen::MatrixXd coef_cov;
    double phi_mean = 1.0;
    double phi_count = 0.0;
    double phi_rate = 1.0;
    /// log of the dispersion normalizer at (phi_count, phi_rate).
    double phi_log_norm = 0.0;
    std::array<double, 2> prec_shape = {0.5, 0.5};
    std::array<double, 2> prec_rate = {1.0, 1.0};
    std::array<double, 2> mix_rate = {1.0, 1.0};
    std::array<double, 2> incl = {0.5, 0.5};

    double mix_mean(int k) const { return 1.0 / mix_rate[static_cast<std::size_t>(k)]; }
    double prec_mean(int k) const { return prec_shape[static_cast<std::size_t>(k)] / prec_rate[static_cast<std::size_t>(k)]; }
    double prec_log_mean(int k) const;
};

/// Factors shared across samples: per axis, the shared indicator and two Beta factors.
struct SharedState {
    std::array<double, 2> shared_incl = {0.5, 0.5};
    std::array<double, 2> p_a = {0.2, 0.2};
    std::array<double, 2> p_b = {1.8, 1.8};
    std::array<double, 2> q_a = {1.0, 1.0};
    std::array<double, 2> q_b = {1.0, 1.0};
};

/// Counts and design matrices of one gene across samples.
struct GeneData {
    std::vector<Eigen::VectorXd> counts;
    std::vector<Eigen::MatrixXd> designs;
    CoefLayout layout;

    std::size_t n_samples() const { return counts.size(); }
};

struct FitOptions {
    int max_iter = 500;
    double elbo_tol = 1e-2;
    double damping = 1.0;
    std::uint64_t seed = 0;
    /// Throw NumericalError when a state invariant fails after any update.
    bool check_invariants = false;
    QuadratureSpec quadrature{};
    /// Also run from a start with every indicator switched on and keep the higher final bound.
    bool slab_start = true;
};

struct GeneFitResult {
    std::array<double, 2> e_u = {0.0, 0.0};
    /// incl[m][k]
    std::vector<std::array<double, 2>> incl;
    std::vector<double> elbo_trace;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

struct VariationalState {
    std::vector<SampleState> samples;
    SharedState shared;
};

/// Starting values; see the implementation for the choices made.
/// `incl_start` sets every inclusion probability, local and shared.
VariationalState init_state(const GeneData& data, const Hyperparameters& hp, double incl_start = 0.5);

/// E exp(-C_i theta) for every spot.
Eigen::VectorXd expected_exp_neg_linear(const SampleState& s, const Eigen::MatrixXd& design);

/// E[beta_k' beta_k] under the coefficient factor.
double expected_sq_norm(const SampleState& s, const CoefLayout& layout, int axis);

void update_g(SampleState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& design);
void update_r(SampleState& s, const Eigen::VectorXd& y, const Hyperparameters& hp);
void update_phi(SampleState& s, const Eigen::MatrixXd& design, const Hyperparameters& hp, const QuadratureSpec& quad = {});
void update_sigma(SampleState& s, const CoefLayout& layout, int axis);
void update_a(SampleState& s, int axis, const Hyperparameters& hp);
void update_alpha(SampleState& s, const SharedState& shared, const CoefLayout& layout, int axis, const Hyperparameters& hp);
void update_u(SharedState& shared, const std::vector<SampleState>& samples, int axis, const Hyperparameters& hp);
void update_p(SharedState& shared, int axis, const Hyperparameters& hp);
void update_q(SharedState& shared, const std::vector<SampleState>& samples, int axis, const Hyperparameters& hp);

/// Prior precision of the coefficients given the current slab factors.
Eigen::VectorXd prior_precision(const SampleState& s, const CoefLayout& layout, const Hyperparameters& hp);

/// One Gaussian message-passing step for the regression coefficients.
void update_theta(SampleState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const CoefLayout& layout,
                  const Hyperparameters& hp, double damping);

/**
 * Expected log joint terms that involve the coefficients, as a function of
 * their Gaussian factor (mean, cov) with all other factors held fixed.
 * Its gradients drive `update_theta`.
 */
double coef_objective(const SampleState& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                      const Eigen::MatrixXd& design, const CoefLayout& layout, const Hyperparameters& hp);

/// Evidence lower bound of the whole gene.
double compute_elbo(const VariationalState& state, const GeneData& data, const Hyperparameters& hp);

/// Per-sample ELBO contribution, excluding the shared-factor terms.
double sample_elbo(const SampleState& s, const SharedState& shared, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& design, const CoefLayout& layout, const Hyperparameters& hp);

/// Shared-factor ELBO terms (indicators u and the Beta factors).
double shared_elbo(const SharedState& shared, const Hyperparameters& hp);

/// Returns an empty string when all invariants hold, otherwise a description.
std::string check_state(const VariationalState& state, const GeneData& data);

/// One full sweep over all factors.
void cavi_sweep(VariationalState& state, const GeneData& data, const Hyperparameters& hp, double damping,
                const QuadratureSpec& quad);

/**
 * Runs coordinate ascent to convergence. With `slab_start`, a second run starts
 * with the indicators on; the run with the higher final bound is returned,
 * preferring converged runs. `iterations` counts the returned run only.
 */
GeneFitResult fit_gene(const GeneData& data, const Hyperparameters& hp, const FitOptions& opts = {});

/// As `fit_gene`, also returning the final state.
GeneFitResult fit_gene(const GeneData& data, const Hyperparameters& hp, const FitOptions& opts, VariationalState* final_state);

} // namespace msvg
