#include "msvg/viengine.hpp"

#include "msvg/error.hpp"
#include "msvg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace msvg {

namespace {

constexpr double phi_floor = 1e-4;
constexpr double phi_ceiling = 1e4;
constexpr double min_damping = 1.0 / 16.0;
constexpr double slab_start_incl = 0.999;

std::size_t ax(int k) {
    return static_cast<std::size_t>(k);
}

double beta_log_mean(double a, double b) {
    return digamma(a) - digamma(a + b);
}

} // namespace

void Hyperparameters::validate() const {
    const bool ok = a_pi > 0 && b_pi > 0 && a_phi > 0 && b_phi > 0 && var_intercept > 0 && var_covariate > 0
                    && spike_var > 0 && gamma2 > 0 && gamma2 < 0.5 && slab_scale[0] > 0 && slab_scale[1] > 0 && c_p > 0
                    && d_p > 0 && c_q > 0 && d_q > 0;
    if (!ok) {
        throw DomainError("hyperparameters out of range");
    }
}

double default_slab_scale(int degree) {
    switch (degree) {
    case 1:
        return 0.08;
    case 2:
        return 0.05;
    case 3:
        return 0.04;
    case 4:
        return 0.03;
    default:
        throw DomainError("default_slab_scale: degree must be in 1..4");
    }
}

double default_gamma2(std::size_t n_samples) {
    if (n_samples >= 4) {
        return 0.01;
    }
    if (n_samples == 3) {
        return 0.005;
    }
    return 0.001;
}

Hyperparameters default_hyperparameters(int degree, std::size_t n_samples) {
    Hyperparameters hp;
    hp.slab_scale = {default_slab_scale(degree), default_slab_scale(degree)};
    hp.gamma2 = default_gamma2(n_samples);
    return hp;
}

double SampleState::prec_log_mean(int k) const {
    return digamma(prec_shape[ax(k)]) - std::log(prec_rate[ax(k)]);
}

Eigen::VectorXd expected_exp_neg_linear(const SampleState& s, const Eigen::MatrixXd& design) {
    const Eigen::VectorXd lin = design * s.coef_mean;
    const Eigen::VectorXd quad = (design * s.coef_cov).cwiseProduct(design).rowwise().sum();
    Eigen::VectorXd out(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        out(i) = std::exp(-lin(i) + 0.5 * quad(i));
        if (!std::isfinite(out(i)) || out(i) <= 0.0) {
            throw NumericalError("non-finite exp(-C theta) moment at spot " + std::to_string(i));
        }
    }
    return out;
}

double expected_sq_norm(const SampleState& s, const CoefLayout& layout, int axis) {
    const int start = layout.block_start(axis);
    const int L = layout.basis_size;
    return s.coef_mean.segment(start, L).squaredNorm() + s.coef_cov.block(start, start, L, L).trace();
}

VariationalState init_state(const GeneData& data, const Hyperparameters& hp, double incl_start) {
    hp.validate();
    if (!(incl_start > 0.0 && incl_start < 1.0)) {
        throw DomainError("init_state: incl_start must lie in (0, 1)");
    }
    if (data.counts.size() != data.designs.size() || data.counts.empty()) {
        throw DomainError("init_state: counts and designs disagree");
    }
    VariationalState state;
    const int d = data.layout.dim();
    for (std::size_t m = 0; m < data.n_samples(); ++m) {
        const Eigen::VectorXd& y = data.counts[m];
        const Eigen::MatrixXd& C = data.designs[m];
        if (C.rows() != y.size() || C.cols() != d) {
            throw DomainError("init_state: design dimensions disagree in sample " + std::to_string(m));
        }
        SampleState s;
        const Eigen::Index n = y.size();
        s.coef_mean = Eigen::VectorXd::Zero(d);
        s.coef_mean(0) = std::log(y.mean() + 0.01);
        s.coef_cov = 0.01 * Eigen::MatrixXd::Identity(d, d);
        s.dropout_prob = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            s.dropout_prob(i) = y(i) > 0.0 ? 0.0 : 0.5;
        }
        // An all-zero sample pulls the dispersion to its floor; start there.
        s.phi_mean = y.isZero(0.0) ? phi_floor : std::max(1.0, hp.a_phi / hp.b_phi);
        for (int k = 0; k < 2; ++k) {
            s.prec_shape[ax(k)] = 0.5;
            s.prec_rate[ax(k)] = 1.0;
            s.mix_rate[ax(k)] = 1.0 + 1.0 / (hp.slab_scale[ax(k)] * hp.slab_scale[ax(k)]);
            s.incl[ax(k)] = incl_start;
        }
        update_g(s, y, C);
        // A consistent dispersion factor for the first bound evaluation; the
        // mean itself stays at its starting value until the first sweep.
        const double keep = s.phi_mean;
        update_phi(s, C, hp);
        s.phi_mean = keep;
        state.samples.push_back(std::move(s));
    }
    for (int k = 0; k < 2; ++k) {
        state.shared.shared_incl[ax(k)] = incl_start;
        state.shared.p_a[ax(k)] = hp.c_p;
        state.shared.p_b[ax(k)] = hp.d_p;
        state.shared.q_a[ax(k)] = hp.c_q;
        state.shared.q_b[ax(k)] = hp.d_q;
    }
    return state;
}

void update_g(SampleState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& design) {
    const Eigen::VectorXd e_exp = expected_exp_neg_linear(s, design);
    s.g_shape.resize(y.size());
    s.g_rate.resize(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double keep = 1.0 - s.dropout_prob(i);
        s.g_shape(i) = keep * y(i) + s.phi_mean;
        s.g_rate(i) = keep + s.phi_mean * e_exp(i);
        if (!std::isfinite(s.g_rate(i)) || !(s.g_rate(i) > 0.0)) {
            throw NumericalError("update_g: invalid rate at spot " + std::to_string(i));
        }
    }
}

void update_r(SampleState& s, const Eigen::VectorXd& y, const Hyperparameters& hp) {
    const double log_on = log_beta(hp.a_pi + 1.0, hp.b_pi);
    const double log_off = log_beta(hp.a_pi, hp.b_pi + 1.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) > 0.0) {
            s.dropout_prob(i) = 0.0;
        } else {
            const double mean_g = s.g_shape(i) / s.g_rate(i);
            s.dropout_prob(i) = logistic(log_on - log_off + mean_g);
        }
    }
}

void update_phi(SampleState& s, const Eigen::MatrixXd& design, const Hyperparameters& hp, const QuadratureSpec& quad) {
    const Eigen::VectorXd e_exp = expected_exp_neg_linear(s, design);
    const Eigen::VectorXd lin = design * s.coef_mean;
    double rate = hp.b_phi;
    for (Eigen::Index i = 0; i < lin.size(); ++i) {
        const double a = s.g_shape(i);
        const double b = s.g_rate(i);
        rate += lin(i) - (digamma(a) - std::log(b)) + (a / b) * e_exp(i);
    }
    const double count = static_cast<double>(lin.size());
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw NumericalError("update_phi: non-positive rate");
    }
    const double log_norm = log_h_integral(hp.a_phi - 1.0, 0, 1.0, count, rate, quad);
    const double log_first = log_h_integral(hp.a_phi, 0, 1.0, count, rate, quad);
    s.phi_count = count;
    s.phi_rate = rate;
    s.phi_log_norm = log_norm;
    s.phi_mean = std::clamp(std::exp(log_first - log_norm), phi_floor, phi_ceiling);
}

void update_sigma(SampleState& s, const CoefLayout& layout, int axis) {
    const double incl = s.incl[ax(axis)];
    s.prec_shape[ax(axis)] = 0.5 * (layout.basis_size * incl + 1.0);
    s.prec_rate[ax(axis)] = 0.5 * incl * expected_sq_norm(s, layout, axis) + s.mix_mean(axis);
}

void update_a(SampleState& s, int axis, const Hyperparameters& hp) {
    const double A = hp.slab_scale[ax(axis)];
    s.mix_rate[ax(axis)] = s.prec_mean(axis) + 1.0 / (A * A);
}

void update_alpha(SampleState& s, const SharedState& shared, const CoefLayout& layout, int axis, const Hyperparameters& hp) {
    const double sq = expected_sq_norm(s, layout, axis);
    const double u = shared.shared_incl[ax(axis)];
    const double L = layout.basis_size;
    const double log_q = beta_log_mean(shared.q_a[ax(axis)], shared.q_b[ax(axis)]);
    const double log_1mq = beta_log_mean(shared.q_b[ax(axis)], shared.q_a[ax(axis)]);
    const double slab = -0.5 * sq * s.prec_mean(axis) + u * log_q + 0.5 * L * s.prec_log_mean(axis)
                        + (1.0 - u) * std::log(hp.gamma2);
    const double spike = -sq / (2.0 * hp.spike_var) + u * log_1mq + (1.0 - u) * std::log1p(-hp.gamma2)
                         - 0.5 * L * std::log(hp.spike_var);
    s.incl[ax(axis)] = logistic(slab - spike);
}

void update_u(SharedState& shared, const std::vector<SampleState>& samples, int axis, const Hyperparameters& hp) {
    const double log_q = beta_log_mean(shared.q_a[ax(axis)], shared.q_b[ax(axis)]);
    const double log_1mq = beta_log_mean(shared.q_b[ax(axis)], shared.q_a[ax(axis)]);
    double on = beta_log_mean(shared.p_a[ax(axis)], shared.p_b[ax(axis)]);
    double off = beta_log_mean(shared.p_b[ax(axis)], shared.p_a[ax(axis)]);
    for (const auto& s : samples) {
        const double incl = s.incl[ax(axis)];
        on += incl * log_q + (1.0 - incl) * log_1mq;
        off += incl * std::log(hp.gamma2) + (1.0 - incl) * std::log1p(-hp.gamma2);
    }
    shared.shared_incl[ax(axis)] = logistic(on - off);
}

void update_p(SharedState& shared, int axis, const Hyperparameters& hp) {
    const double u = shared.shared_incl[ax(axis)];
    shared.p_a[ax(axis)] = u + hp.c_p;
    shared.p_b[ax(axis)] = hp.d_p - u + 1.0;
}

void update_q(SharedState& shared, const std::vector<SampleState>& samples, int axis, const Hyperparameters& hp) {
    const double u = shared.shared_incl[ax(axis)];
    double total = 0.0;
    for (const auto& s : samples) {
        total += s.incl[ax(axis)];
    }
    const double M = static_cast<double>(samples.size());
    shared.q_a[ax(axis)] = u * total + hp.c_q;
    shared.q_b[ax(axis)] = u * (M - total) + hp.d_q;
}

Eigen::VectorXd prior_precision(const SampleState& s, const CoefLayout& layout, const Hyperparameters& hp) {
    Eigen::VectorXd prec(layout.dim());
    prec(0) = 1.0 / hp.var_intercept;
    for (int k = 0; k < 2; ++k) {
        const double incl = s.incl[ax(k)];
        const double v = incl * s.prec_mean(k) + (1.0 - incl) / hp.spike_var;
        prec.segment(layout.block_start(k), layout.basis_size).setConstant(v);
    }
    if (layout.n_covariates > 0) {
        prec.tail(layout.n_covariates).setConstant(1.0 / hp.var_covariate);
    }
    return prec;
}

double coef_objective(const SampleState& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                      const Eigen::MatrixXd& design, const CoefLayout& layout, const Hyperparameters& hp) {
    const Eigen::VectorXd prec = prior_precision(s, layout, hp);
    const Eigen::VectorXd lin = design * mean;
    const Eigen::VectorXd quad = (design * cov).cwiseProduct(design).rowwise().sum();
    double total = 0.0;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double mean_g = s.g_shape(i) / s.g_rate(i);
        total -= s.phi_mean * (lin(i) + mean_g * std::exp(-lin(i) + 0.5 * quad(i)));
    }
    total -= 0.5 * (prec.array() * (mean.array().square() + cov.diagonal().array())).sum();
    return total;
}

void update_theta(SampleState& s, const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const CoefLayout& layout,
                  const Hyperparameters& hp, double damping) {
    (void)y;
    const Eigen::VectorXd e_exp = expected_exp_neg_linear(s, design);
    const Eigen::VectorXd prec = prior_precision(s, layout, hp);
    Eigen::VectorXd w(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        w(i) = (s.g_shape(i) / s.g_rate(i)) * e_exp(i);
    }
    Eigen::MatrixXd P = s.phi_mean * (design.transpose() * w.asDiagonal() * design);
    P.diagonal() += prec;
    P = 0.5 * (P + P.transpose());
    const Eigen::VectorXd grad = s.phi_mean * (design.transpose() * (w.array() - 1.0).matrix()) - (prec.array() * s.coef_mean.array()).matrix();

    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) {
        P.diagonal().array() += 1e-8;
        llt.compute(P);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("update_theta: precision matrix not positive definite");
        }
    }
    const Eigen::Index d = P.rows();
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    cov = 0.5 * (cov + cov.transpose());
    const Eigen::VectorXd mean = s.coef_mean + damping * (cov * grad);
    if (!mean.allFinite() || !cov.allFinite()) {
        throw NumericalError("update_theta: non-finite update");
    }
    s.coef_mean = mean;
    s.coef_cov = cov;
}

std::string check_state(const VariationalState& state, const GeneData& data) {
    std::ostringstream err;
    for (std::size_t m = 0; m < state.samples.size(); ++m) {
        const SampleState& s = state.samples[m];
        const Eigen::VectorXd& y = data.counts[m];
        if (!(s.g_shape.array() > 0.0).all() || !(s.g_rate.array() > 0.0).all() || !s.g_shape.allFinite()
            || !s.g_rate.allFinite()) {
            err << "sample " << m << ": Gamma factor of g not positive; ";
        }
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double r = s.dropout_prob(i);
            if (!(r >= 0.0 && r <= 1.0)) {
                err << "sample " << m << ": dropout probability out of range; ";
                break;
            }
            if (y(i) > 0.0 && r != 0.0) {
                err << "sample " << m << ": dropout probability nonzero at positive count; ";
                break;
            }
        }
        if (!(s.phi_mean > 0.0) || !(s.phi_rate > 0.0) || !std::isfinite(s.phi_mean)) {
            err << "sample " << m << ": dispersion factor invalid; ";
        }
        for (int k = 0; k < 2; ++k) {
            if (!(s.prec_shape[ax(k)] > 0.0) || !(s.prec_rate[ax(k)] > 0.0) || !(s.mix_rate[ax(k)] > 0.0)) {
                err << "sample " << m << ": slab factors not positive; ";
            }
            if (!(s.incl[ax(k)] >= 0.0 && s.incl[ax(k)] <= 1.0)) {
                err << "sample " << m << ": inclusion probability out of range; ";
            }
        }
        const Eigen::MatrixXd asym = s.coef_cov - s.coef_cov.transpose();
        if (asym.cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.coef_cov.cwiseAbs().maxCoeff())) {
            err << "sample " << m << ": coefficient covariance not symmetric; ";
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.coef_cov, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 0.0)) {
            err << "sample " << m << ": coefficient covariance not positive definite; ";
        }
    }
    const SharedState& sh = state.shared;
    for (int k = 0; k < 2; ++k) {
        if (!(sh.shared_incl[ax(k)] >= 0.0 && sh.shared_incl[ax(k)] <= 1.0)) {
            err << "shared indicator out of range; ";
        }
        if (!(sh.p_a[ax(k)] > 0 && sh.p_b[ax(k)] > 0 && sh.q_a[ax(k)] > 0 && sh.q_b[ax(k)] > 0)) {
            err << "Beta factor not positive; ";
        }
    }
    return err.str();
}

void cavi_sweep(VariationalState& state, const GeneData& data, const Hyperparameters& hp, double damping,
                const QuadratureSpec& quad) {
    for (std::size_t m = 0; m < data.n_samples(); ++m) {
        SampleState& s = state.samples[m];
        const Eigen::VectorXd& y = data.counts[m];
        const Eigen::MatrixXd& C = data.designs[m];
        update_theta(s, y, C, data.layout, hp, damping);
        update_phi(s, C, hp, quad);
        update_g(s, y, C);
        update_r(s, y, hp);
        for (int k = 0; k < 2; ++k) {
            update_sigma(s, data.layout, k);
            update_a(s, k, hp);
            update_alpha(s, state.shared, data.layout, k, hp);
        }
    }
    for (int k = 0; k < 2; ++k) {
        update_q(state.shared, state.samples, k, hp);
        update_p(state.shared, k, hp);
        update_u(state.shared, state.samples, k, hp);
    }
}

namespace {

GeneFitResult summarize(const VariationalState& state, GeneFitResult result) {
    result.e_u = state.shared.shared_incl;
    result.incl.clear();
    for (const auto& s : state.samples) {
        result.incl.push_back(s.incl);
    }
    return result;
}

// Sweep plus bound; returns NaN on numerical failure.
double try_sweep(VariationalState& state, const GeneData& data, const Hyperparameters& hp, const FitOptions& opts,
                 double damping, std::string& message) {
    try {
        cavi_sweep(state, data, hp, damping, opts.quadrature);
        if (opts.check_invariants) {
            const std::string bad = check_state(state, data);
            if (!bad.empty()) {
                throw NumericalError("state invariant violated: " + bad);
            }
        }
        const double elbo = compute_elbo(state, data, hp);
        if (!std::isfinite(elbo)) {
            message = "non-finite bound";
        }
        return elbo;
    } catch (const NumericalError& e) {
        message = e.what();
        return std::numeric_limits<double>::quiet_NaN();
    }
}

GeneFitResult run_from(VariationalState& state, const GeneData& data, const Hyperparameters& hp, const FitOptions& opts) {
    GeneFitResult result;
    double damping = std::clamp(opts.damping, min_damping, 1.0);
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= opts.max_iter; ++it) {
        const VariationalState snapshot = state;
        std::string message;
        double elbo = try_sweep(state, data, hp, opts, damping, message);
        if (!std::isfinite(elbo)) {
            state = snapshot;
            damping = std::max(min_damping, 0.5 * damping);
            elbo = try_sweep(state, data, hp, opts, damping, message);
            if (!std::isfinite(elbo)) {
                state = snapshot;
                result.iterations = it - 1;
                result.converged = false;
                result.message = "numerical failure: " + message;
                return result;
            }
        }
        result.elbo_trace.push_back(elbo);
        result.iterations = it;
        if (std::isfinite(previous) && std::abs(elbo - previous) < opts.elbo_tol) {
            result.converged = true;
            break;
        }
        previous = elbo;
    }
    if (!result.converged) {
        result.message = "iteration limit reached";
    }
    return result;
}

bool better(const GeneFitResult& a, const GeneFitResult& b) {
    if (a.converged != b.converged) {
        return a.converged;
    }
    const double ea = a.elbo_trace.empty() ? -std::numeric_limits<double>::infinity() : a.elbo_trace.back();
    const double eb = b.elbo_trace.empty() ? -std::numeric_limits<double>::infinity() : b.elbo_trace.back();
    return ea > eb;
}

} // namespace

GeneFitResult fit_gene(const GeneData& data, const Hyperparameters& hp, const FitOptions& opts) {
    return fit_gene(data, hp, opts, nullptr);
}

GeneFitResult fit_gene(const GeneData& data, const Hyperparameters& hp, const FitOptions& opts, VariationalState* final_state) {
    if (opts.max_iter < 1) {
        throw DomainError("fit_gene: max_iter must be at least 1");
    }
    VariationalState state = init_state(data, hp);
    GeneFitResult result = run_from(state, data, hp, opts);
    if (opts.slab_start) {
        VariationalState other = init_state(data, hp, slab_start_incl);
        GeneFitResult alt = run_from(other, data, hp, opts);
        if (better(alt, result)) {
            result = std::move(alt);
            state = std::move(other);
        }
    }
    result = summarize(state, std::move(result));
    if (final_state != nullptr) {
        *final_state = std::move(state);
    }
    return result;
}

} // namespace msvg
