#include "msvg/error.hpp"
#include "msvg/numerics.hpp"
#include "msvg/viengine.hpp"

#include <cmath>
#include <string>

namespace msvg {

namespace {

constexpr double log_two_pi = 1.8378770664093454836;

std::size_t ax(int k) {
    return static_cast<std::size_t>(k);
}

double gamma_entropy(double shape, double rate) {
    return shape - std::log(rate) + log_gamma(shape) + (1.0 - shape) * digamma(shape);
}

double bernoulli_entropy(double p) {
    double h = 0.0;
    if (p > 0.0) {
        h -= p * std::log(p);
    }
    if (p < 1.0) {
        h -= (1.0 - p) * std::log1p(-p);
    }
    return h;
}

double beta_entropy(double a, double b) {
    return log_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b);
}

// E log Beta(x; c, d) under x ~ Beta(a, b).
double beta_cross(double a, double b, double c, double d) {
    const double dg = digamma(a + b);
    return (c - 1.0) * (digamma(a) - dg) + (d - 1.0) * (digamma(b) - dg) - log_beta(c, d);
}

void require_finite(double v, const char* term) {
    if (!std::isfinite(v)) {
        throw NumericalError(std::string("compute_elbo: non-finite term '") + term + "'");
    }
}

} // namespace

double sample_elbo(const SampleState& s, const SharedState& shared, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& design, const CoefLayout& layout, const Hyperparameters& hp) {
    const Eigen::Index n = y.size();
    const Eigen::VectorXd e_exp = expected_exp_neg_linear(s, design);
    const Eigen::VectorXd lin = design * s.coef_mean;

    const double log_b_prior = log_beta(hp.a_pi, hp.b_pi);
    const double log_b_on = log_beta(hp.a_pi + 1.0, hp.b_pi) - log_b_prior;
    const double log_b_off = log_beta(hp.a_pi, hp.b_pi + 1.0) - log_b_prior;

    double likelihood = 0.0;
    double dropout = 0.0;
    double g_terms = 0.0;
    double rate_now = hp.b_phi;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = s.g_shape(i);
        const double b = s.g_rate(i);
        const double mean_g = a / b;
        const double log_g = digamma(a) - std::log(b);
        const double r = s.dropout_prob(i);
        likelihood += (1.0 - r) * (y(i) * log_g - mean_g - log_gamma(y(i) + 1.0));
        dropout += r * log_b_on + (1.0 - r) * log_b_off + bernoulli_entropy(r);
        g_terms += -log_g + gamma_entropy(a, b);
        rate_now += lin(i) - log_g + mean_g * e_exp(i);
    }
    require_finite(likelihood, "likelihood");
    require_finite(dropout, "dropout");
    require_finite(g_terms, "expression");

    // Dispersion factor: prior, the Gamma prior of g and the entropy combine
    // into the log normalizer plus a correction for a stale rate.
    const double dispersion = s.phi_mean * (s.phi_rate - rate_now) + s.phi_log_norm + hp.a_phi * std::log(hp.b_phi)
                              - log_gamma(hp.a_phi);
    require_finite(dispersion, "dispersion");

    const int d = layout.dim();
    const int L = layout.basis_size;
    const int J = layout.n_covariates;
    double coef = -0.5 * (log_two_pi + std::log(hp.var_intercept))
                  - (s.coef_mean(0) * s.coef_mean(0) + s.coef_cov(0, 0)) / (2.0 * hp.var_intercept);
    if (J > 0) {
        const double sq = s.coef_mean.tail(J).squaredNorm() + s.coef_cov.diagonal().tail(J).sum();
        coef += -0.5 * J * (log_two_pi + std::log(hp.var_covariate)) - sq / (2.0 * hp.var_covariate);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s.coef_cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("compute_elbo: coefficient covariance not positive definite");
    }
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    coef += 0.5 * (d * (log_two_pi + 1.0) + log_det);
    require_finite(coef, "coefficients");

    double slab = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sq = expected_sq_norm(s, layout, k);
        const double incl = s.incl[ax(k)];
        const double prec = s.prec_mean(k);
        const double log_prec = s.prec_log_mean(k);
        const double mix = s.mix_mean(k);
        const double log_mix = digamma(1.0) - std::log(s.mix_rate[ax(k)]);
        const double A2 = hp.slab_scale[ax(k)] * hp.slab_scale[ax(k)];

        slab += incl * (-0.5 * L * log_two_pi + 0.5 * L * log_prec - 0.5 * prec * sq);
        slab += (1.0 - incl) * (-0.5 * L * (log_two_pi + std::log(hp.spike_var)) - sq / (2.0 * hp.spike_var));
        // Gamma(1/2, mix) prior on the slab precision, Gamma(1/2, 1/A^2) prior on the mixing variable.
        slab += 0.5 * log_mix - log_gamma(0.5) - 0.5 * log_prec - mix * prec;
        slab += gamma_entropy(s.prec_shape[ax(k)], s.prec_rate[ax(k)]);
        slab += -0.5 * std::log(A2) - log_gamma(0.5) - 0.5 * log_mix - mix / A2;
        slab += gamma_entropy(1.0, s.mix_rate[ax(k)]);

        const double u = shared.shared_incl[ax(k)];
        const double log_q = digamma(shared.q_a[ax(k)]) - digamma(shared.q_a[ax(k)] + shared.q_b[ax(k)]);
        const double log_1mq = digamma(shared.q_b[ax(k)]) - digamma(shared.q_a[ax(k)] + shared.q_b[ax(k)]);
        slab += incl * (u * log_q + (1.0 - u) * std::log(hp.gamma2));
        slab += (1.0 - incl) * (u * log_1mq + (1.0 - u) * std::log1p(-hp.gamma2));
        slab += bernoulli_entropy(incl);
    }
    require_finite(slab, "slab");

    return likelihood + dropout + g_terms + dispersion + coef + slab;
}

double shared_elbo(const SharedState& shared, const Hyperparameters& hp) {
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double u = shared.shared_incl[ax(k)];
        const double pa = shared.p_a[ax(k)];
        const double pb = shared.p_b[ax(k)];
        const double dg = digamma(pa + pb);
        total += u * (digamma(pa) - dg) + (1.0 - u) * (digamma(pb) - dg) + bernoulli_entropy(u);
        total += beta_cross(pa, pb, hp.c_p, hp.d_p) + beta_entropy(pa, pb);
        total += beta_cross(shared.q_a[ax(k)], shared.q_b[ax(k)], hp.c_q, hp.d_q)
                 + beta_entropy(shared.q_a[ax(k)], shared.q_b[ax(k)]);
    }
    require_finite(total, "shared");
    return total;
}

double compute_elbo(const VariationalState& state, const GeneData& data, const Hyperparameters& hp) {
    double total = shared_elbo(state.shared, hp);
    for (std::size_t m = 0; m < data.n_samples(); ++m) {
        total += sample_elbo(state.samples[m], state.shared, data.counts[m], data.designs[m], data.layout, hp);
    }
    return total;
}

} // namespace msvg
