#pragma once

// Monte-Carlo estimate of E_q[log p] - E_q[log q], written from the
// generative model rather than from the library's closed forms.
// The dropout prior is the Beta-Bernoulli marginal per spot, which is the
// exact joint only for single-spot samples.

#include "h_oracle.hpp"
#include "msvg/viengine.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace msvg_test {

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

namespace mc_detail {

inline double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1) * std::log(x) - rate * x;
}

// Same density, taking log x; stays finite when x underflows.
inline double log_gamma_pdf_at_log(double log_x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1) * log_x - rate * std::exp(log_x);
}

inline double log_beta_fn(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double log_beta_pdf(double x, double a, double b) {
    return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - log_beta_fn(a, b);
}

inline double log_normal_pdf(double x, double var) {
    return -0.5 * std::log(2 * M_PI * var) - x * x / (2 * var);
}

inline double log_bern(int z, double p) {
    return z ? std::log(p) : std::log1p(-p);
}

// Inverse-CDF sampler for the dispersion factor on a fine grid in log phi.
class DispersionSampler {
public:
    DispersionSampler(double a_phi, double count, double rate) : count_(count), rate_(rate), a_(a_phi) {
        const auto log_norm = h_oracle(a_phi - 1.0, 0, 1.0, count, rate);
        if (!log_norm) {
            throw std::runtime_error("dispersion factor is improper");
        }
        log_norm_ = *log_norm;
        const int cells = 400000;
        lo_ = -60.0;
        hi_ = 12.0;
        step_ = (hi_ - lo_) / cells;
        cdf_.assign(cells + 1, 0.0L);
        long double prev = std::exp(static_cast<long double>(log_density_u(lo_)));
        for (int i = 1; i <= cells; ++i) {
            const long double cur = std::exp(static_cast<long double>(log_density_u(lo_ + i * step_)));
            cdf_[i] = cdf_[i - 1] + 0.5L * (prev + cur) * step_;
            prev = cur;
        }
        // Mass left of the grid: density ~ exp((p + s + 1) u) there.
        const long double left = std::exp(static_cast<long double>(log_density_u(lo_))) / (a_ + count_);
        for (auto& c : cdf_) {
            c += left;
        }
        total_ = cdf_.back();
        left_ = left;
    }

    template <class Rng>
    double draw(Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const long double target = unit(rng) * total_;
        if (target <= left_) {
            // Power-law tail below the grid.
            const double frac = static_cast<double>(target / left_);
            return std::exp(lo_ + std::log(frac) / (a_ + count_));
        }
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), target);
        const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cdf_.begin()));
        const long double c0 = cdf_[i - 1];
        const long double c1 = cdf_[i];
        const double frac = c1 > c0 ? static_cast<double>((target - c0) / (c1 - c0)) : 0.5;
        return std::exp(lo_ + (static_cast<double>(i - 1) + frac) * step_);
    }

    double log_pdf(double phi) const {
        return (a_ - 1.0) * std::log(phi) + count_ * (phi * std::log(phi) - std::lgamma(phi)) - rate_ * phi - log_norm_;
    }

    // Grid mass relative to the oracle normalizer, a check on the sampler.
    double mass_ratio() const { return static_cast<double>(total_) / std::exp(log_norm_); }

private:
    double log_density_u(double u) const {
        const double x = std::exp(u);
        return a_ * u + count_ * (x * u - std::lgamma(x)) - rate_ * x;
    }

    double count_;
    double rate_;
    double a_;
    double log_norm_ = 0.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double step_ = 0.0;
    std::vector<long double> cdf_;
    long double total_ = 0.0L;
    long double left_ = 0.0L;
};

} // namespace mc_detail

inline McEstimate mc_elbo(const msvg::VariationalState& state, const msvg::GeneData& data,
                          const msvg::Hyperparameters& hp, std::size_t draws, std::uint64_t seed) {
    using namespace mc_detail;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto gamma_draw = [&](double shape, double rate) {
        std::gamma_distribution<double> g(shape, 1.0 / rate);
        return g(rng);
    };
    // log of a Gamma draw; for shape < 1 uses Ga(a) = Ga(a + 1) * U^(1/a) so tiny shapes do not underflow.
    auto log_gamma_draw = [&](double shape, double rate) {
        if (shape >= 1.0) {
            return std::log(gamma_draw(shape, rate));
        }
        return std::log(gamma_draw(shape + 1.0, rate)) + std::log1p(-unit(rng)) / shape;
    };
    auto beta_draw = [&](double a, double b) {
        const double x = gamma_draw(a, 1.0);
        const double y = gamma_draw(b, 1.0);
        return x / (x + y);
    };

    const std::size_t M = data.n_samples();
    const int L = data.layout.basis_size;
    const int J = data.layout.n_covariates;
    const int d = data.layout.dim();
    std::vector<DispersionSampler> phi_q;
    std::vector<Eigen::MatrixXd> chol;
    std::vector<Eigen::MatrixXd> cov_inv;
    std::vector<double> log_det;
    for (const auto& s : state.samples) {
        phi_q.emplace_back(hp.a_phi, s.phi_count, s.phi_rate);
        Eigen::LLT<Eigen::MatrixXd> llt(s.coef_cov);
        chol.push_back(llt.matrixL());
        cov_inv.push_back(s.coef_cov.inverse());
        log_det.push_back(2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum());
    }

    long double sum = 0.0L;
    long double sum_sq = 0.0L;
    for (std::size_t draw = 0; draw < draws; ++draw) {
        double log_p = 0.0;
        double log_q = 0.0;
        int u_k[2];
        double q_k[2];
        for (int k = 0; k < 2; ++k) {
            const auto& sh = state.shared;
            const double p = beta_draw(sh.p_a[k], sh.p_b[k]);
            const double q = beta_draw(sh.q_a[k], sh.q_b[k]);
            const int u = unit(rng) < sh.shared_incl[k] ? 1 : 0;
            log_q += log_beta_pdf(p, sh.p_a[k], sh.p_b[k]) + log_beta_pdf(q, sh.q_a[k], sh.q_b[k]) +
                     log_bern(u, sh.shared_incl[k]);
            log_p += log_beta_pdf(p, hp.c_p, hp.d_p) + log_beta_pdf(q, hp.c_q, hp.d_q) + log_bern(u, p);
            u_k[k] = u;
            q_k[k] = q;
        }
        for (std::size_t m = 0; m < M; ++m) {
            const auto& s = state.samples[m];
            const Eigen::VectorXd& y = data.counts[m];
            const Eigen::MatrixXd& C = data.designs[m];

            Eigen::VectorXd z(d);
            for (int j = 0; j < d; ++j) {
                z(j) = normal(rng);
            }
            const Eigen::VectorXd theta = s.coef_mean + chol[m] * z;
            const Eigen::VectorXd diff = theta - s.coef_mean;
            log_q += -0.5 * (d * std::log(2 * M_PI) + log_det[m] + diff.dot(cov_inv[m] * diff));

            log_p += log_normal_pdf(theta(0), hp.var_intercept);
            for (int j = 0; j < J; ++j) {
                log_p += log_normal_pdf(theta(1 + 2 * L + j), hp.var_covariate);
            }
            for (int k = 0; k < 2; ++k) {
                const double A2 = hp.slab_scale[k] * hp.slab_scale[k];
                const double nu = gamma_draw(1.0, s.mix_rate[k]);
                const double tau = gamma_draw(s.prec_shape[k], s.prec_rate[k]);
                const int alpha = unit(rng) < s.incl[k] ? 1 : 0;
                log_q += log_gamma_pdf(nu, 1.0, s.mix_rate[k]) + log_gamma_pdf(tau, s.prec_shape[k], s.prec_rate[k]) +
                         log_bern(alpha, s.incl[k]);
                log_p += log_gamma_pdf(nu, 0.5, 1.0 / A2) + log_gamma_pdf(tau, 0.5, nu);
                log_p += log_bern(alpha, u_k[k] ? q_k[k] : hp.gamma2);
                for (int l = 0; l < L; ++l) {
                    log_p += log_normal_pdf(theta(1 + k * L + l), alpha ? 1.0 / tau : hp.spike_var);
                }
            }

            const double phi = phi_q[m].draw(rng);
            log_q += phi_q[m].log_pdf(phi);
            log_p += log_gamma_pdf(phi, hp.a_phi, hp.b_phi);

            for (Eigen::Index i = 0; i < y.size(); ++i) {
                const double log_g = log_gamma_draw(s.g_shape(i), s.g_rate(i));
                const double g = std::exp(log_g);
                const int r = unit(rng) < s.dropout_prob(i) ? 1 : 0;
                log_q += log_gamma_pdf_at_log(log_g, s.g_shape(i), s.g_rate(i)) + log_bern(r, s.dropout_prob(i));
                log_p += log_beta_fn(hp.a_pi + r, hp.b_pi + 1 - r) - log_beta_fn(hp.a_pi, hp.b_pi);
                const double lin = C.row(i).dot(theta);
                log_p += log_gamma_pdf_at_log(log_g, phi, phi * std::exp(-lin));
                if (r == 0) {
                    log_p += y(i) * log_g - g - std::lgamma(y(i) + 1.0);
                } else if (y(i) > 0) {
                    log_p += -INFINITY;
                }
            }
        }
        const double v = log_p - log_q;
        sum += v;
        sum_sq += static_cast<long double>(v) * v;
    }
    McEstimate out;
    const long double n = static_cast<long double>(draws);
    const long double mean = sum / n;
    const long double var = (sum_sq / n - mean * mean) * n / (n - 1);
    out.mean = static_cast<double>(mean);
    out.std_error = static_cast<double>(std::sqrt(var / n));
    return out;
}

} // namespace msvg_test
