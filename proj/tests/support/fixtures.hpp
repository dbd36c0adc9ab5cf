#pragma once

// Small fixed instances plus test-side oracles for the coefficient update.

#include "msvg/viengine.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace msvg_test {

using msvg::CoefLayout;
using msvg::GeneData;
using msvg::Hyperparameters;
using msvg::SampleState;
using msvg::VariationalState;

// Degree-1 Bernstein basis is t itself, so rows are [1, s1, s2, x...].
inline GeneData two_sample_fixture() {
    GeneData data;
    data.layout = CoefLayout{1, 1};
    const double ys[2][8] = {{0, 3, 1, 0, 7, 2, 0, 5}, {2, 0, 0, 4, 1, 0, 9, 1}};
    for (int m = 0; m < 2; ++m) {
        Eigen::VectorXd y(8);
        Eigen::MatrixXd C(8, 4);
        for (int i = 0; i < 8; ++i) {
            y(i) = ys[m][i];
            C(i, 0) = 1.0;
            C(i, 1) = i / 7.0;
            C(i, 2) = ((3 * i + m) % 8) / 7.0;
            C(i, 3) = 0.1 * i - 0.3 + 0.2 * m;
        }
        data.counts.push_back(y);
        data.designs.push_back(C);
    }
    return data;
}

inline GeneData one_spot_fixture() {
    GeneData data;
    data.layout = CoefLayout{1, 0};
    Eigen::MatrixXd C(1, 3);
    C << 1.0, 0.3, 0.7;
    data.counts.push_back(Eigen::VectorXd::Zero(1));
    data.designs.push_back(C);
    return data;
}

inline GeneData five_spot_fixture() {
    GeneData data;
    data.layout = CoefLayout{2, 1};
    Eigen::VectorXd y(5);
    y << 4, 0, 1, 6, 2;
    Eigen::MatrixXd C(5, 6);
    const double t1[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    const double t2[5] = {0.6, 0.1, 0.9, 0.3, 0.5};
    for (int i = 0; i < 5; ++i) {
        C(i, 0) = 1.0;
        C(i, 1) = 2 * t1[i] * (1 - t1[i]);
        C(i, 2) = t1[i] * t1[i];
        C(i, 3) = 2 * t2[i] * (1 - t2[i]);
        C(i, 4) = t2[i] * t2[i];
        C(i, 5) = 0.2 * i - 0.4;
    }
    data.counts.push_back(y);
    data.designs.push_back(C);
    return data;
}

inline Hyperparameters fixture_hp(const GeneData& data) {
    return msvg::default_hyperparameters(data.layout.basis_size, data.n_samples());
}

inline VariationalState warmed_state(const GeneData& data, const Hyperparameters& hp, int sweeps) {
    VariationalState state = msvg::init_state(data, hp);
    for (int i = 0; i < sweeps; ++i) {
        msvg::cavi_sweep(state, data, hp, 1.0, {});
    }
    return state;
}

// Prior precision of each coefficient, from the factor parameters directly.
inline Eigen::VectorXd prior_precision_oracle(const SampleState& s, const CoefLayout& layout, const Hyperparameters& hp) {
    Eigen::VectorXd prec(layout.dim());
    prec(0) = 1.0 / hp.var_intercept;
    for (int k = 0; k < 2; ++k) {
        const double incl = s.incl[static_cast<std::size_t>(k)];
        const double tau = s.prec_shape[static_cast<std::size_t>(k)] / s.prec_rate[static_cast<std::size_t>(k)];
        for (int l = 0; l < layout.basis_size; ++l) {
            prec(1 + k * layout.basis_size + l) = incl * tau + (1.0 - incl) / hp.spike_var;
        }
    }
    for (int j = 0; j < layout.n_covariates; ++j) {
        prec(1 + 2 * layout.basis_size + j) = 1.0 / hp.var_covariate;
    }
    return prec;
}

/**
 * E over theta ~ N(mean, cov) of the log joint terms involving theta:
 * sum_i [-phi C_i theta - phi E[g_i] exp(-C_i theta)] - sum_j prec_j theta_j^2 / 2.
 * `cov` need not be symmetric; only c' cov c and its diagonal enter.
 */
inline double theta_objective_oracle(const SampleState& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                     const Eigen::MatrixXd& C, const CoefLayout& layout, const Hyperparameters& hp) {
    const Eigen::VectorXd prec = prior_precision_oracle(s, layout, hp);
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        const Eigen::RowVectorXd c = C.row(i);
        const double lin = c.dot(mean);
        const double var = c * cov * c.transpose();
        const double eg = s.g_shape(i) / s.g_rate(i);
        total += -s.phi_mean * lin - s.phi_mean * eg * std::exp(-lin + 0.5 * var);
    }
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        total -= 0.5L * prec(j) * (mean(j) * mean(j) + cov(j, j));
    }
    return static_cast<double>(total);
}

struct GaussianUpdate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/**
 * Message-passing step built from central finite differences of the
 * objective: cov = (-2 dF/dSigma)^-1, mean = mean + cov dF/dmu.
 */
inline GaussianUpdate ncvmp_fd_oracle(const SampleState& s, const Eigen::MatrixXd& C, const CoefLayout& layout,
                                      const Hyperparameters& hp, double h = 1e-5) {
    const Eigen::VectorXd mu = s.coef_mean;
    const Eigen::MatrixXd Sigma = s.coef_cov;
    const Eigen::Index d = mu.size();
    auto F = [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& S) {
        return theta_objective_oracle(s, m, S, C, layout, hp);
    };
    Eigen::VectorXd grad_mu(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd up = mu;
        Eigen::VectorXd dn = mu;
        up(j) += h;
        dn(j) -= h;
        grad_mu(j) = (F(up, Sigma) - F(dn, Sigma)) / (2 * h);
    }
    Eigen::MatrixXd grad_sigma(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = 0; k < d; ++k) {
            Eigen::MatrixXd up = Sigma;
            Eigen::MatrixXd dn = Sigma;
            up(j, k) += h;
            dn(j, k) -= h;
            grad_sigma(j, k) = (F(mu, up) - F(mu, dn)) / (2 * h);
        }
    }
    GaussianUpdate out;
    out.cov = (-2.0 * grad_sigma).inverse();
    out.mean = mu + out.cov * grad_mu;
    return out;
}

} // namespace msvg_test
