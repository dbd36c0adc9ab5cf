#include "msvg/simgen.hpp"

#include "msvg/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace msvg {

namespace {

struct PatternEntry {
    PatternKind kind;
    const char* name;
};

constexpr PatternEntry pattern_table[] = {
    {PatternKind::linear, "linear"},
    {PatternKind::focal, "focal"},
    {PatternKind::periodic, "periodic"},
    {PatternKind::sigmoid, "sigmoid"},
    {PatternKind::poly1, "poly1"},
    {PatternKind::poly2, "poly2"},
    {PatternKind::poly3, "poly3"},
    {PatternKind::poly4, "poly4"},
    {PatternKind::linear_focal, "linear_focal"},
    {PatternKind::linear_periodic, "linear_periodic"},
    {PatternKind::focal_periodic, "focal_periodic"},
    {PatternKind::nngp, "nngp"},
    {PatternKind::none, "none"},
};

double single_form(PatternKind kind, double b, double s) {
    switch (kind) {
    case PatternKind::linear:
        return b * s;
    case PatternKind::focal:
        return b * std::exp(-s * s) / 2.0;
    case PatternKind::periodic:
        return b * std::cos(2.0 * std::numbers::pi * s);
    case PatternKind::sigmoid:
        return b / (1.0 + std::exp(-s));
    case PatternKind::poly1:
        return 0.5 * b * (s + 1.0) * (s - 0.8) * (s - 1.6);
    case PatternKind::poly2:
        return b * (-0.5 * s * s * s + 0.3 * s);
    case PatternKind::poly3:
        return b * (0.15 * s * s * s * s - 0.1 * s * s + 0.7);
    case PatternKind::poly4:
        return b * (0.25 * s * s * s + 0.1 * s * s - 0.15 * s + 0.3);
    case PatternKind::none:
        return 0.0;
    default:
        throw DomainError("spatial_effect: kind has no closed form");
    }
}

// Maps lattice positions 0..count-1 onto [-2, 2].
double eval_coordinate(std::size_t index, std::size_t count) {
    if (count <= 1) {
        return 0.0;
    }
    return -2.0 + 4.0 * static_cast<double>(index) / static_cast<double>(count - 1);
}

} // namespace

PatternKind parse_pattern(const std::string& name) {
    for (const auto& e : pattern_table) {
        if (name == e.name) {
            return e.kind;
        }
    }
    throw DomainError("unknown pattern '" + name + "'");
}

std::string pattern_name(PatternKind kind) {
    for (const auto& e : pattern_table) {
        if (kind == e.kind) {
            return e.name;
        }
    }
    return "none";
}

double spatial_effect(PatternKind kind, double beta0, double s, int axis) {
    switch (kind) {
    case PatternKind::linear_focal:
        return axis == 0 ? single_form(PatternKind::linear, beta0, s) : single_form(PatternKind::focal, beta0, s);
    case PatternKind::linear_periodic:
        return axis == 0 ? single_form(PatternKind::linear, beta0, s) : single_form(PatternKind::periodic, beta0, s);
    case PatternKind::focal_periodic:
        return axis == 0 ? single_form(PatternKind::focal, beta0, s) : single_form(PatternKind::periodic, beta0, s);
    case PatternKind::nngp:
        throw DomainError("spatial_effect: the Gaussian-field pattern has no closed form");
    default:
        return single_form(kind, beta0, s);
    }
}

std::array<double, 4> strength_tiers(PatternKind kind) {
    switch (kind) {
    case PatternKind::focal:
    case PatternKind::focal_periodic:
        return {0.6, 0.4, 0.2, 0.05};
    case PatternKind::periodic:
        return {0.8, 0.6, 0.4, 0.2};
    case PatternKind::none:
        return {0.0, 0.0, 0.0, 0.0};
    default:
        return {0.8, 0.5, 0.2, 0.05};
    }
}

int setting_tier(int setting, std::size_t m) {
    static constexpr int table[4][4] = {{0, 1, 1, 1}, {0, 1, 2, 2}, {1, 1, 2, 2}, {1, 2, 3, 3}};
    if (setting < 1 || setting > 4) {
        throw DomainError("setting must be 1..4");
    }
    return table[setting - 1][m % 4];
}

void SimConfig::validate() const {
    if (n_samples < 1 || grid_rows < 1 || grid_cols < 1 || n_genes < 1) {
        throw DomainError("simulation: sizes must be positive");
    }
    if (n_sv > n_genes) {
        throw DomainError("simulation: more SV genes than genes");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw DomainError("simulation: dropout must lie in [0, 1)");
    }
    if (!(dispersion > 0.0)) {
        throw DomainError("simulation: dispersion must be positive");
    }
    if (region_dirichlet.size() != 4) {
        throw DomainError("simulation: four region Dirichlet vectors required");
    }
    for (const auto& v : region_dirichlet) {
        if (v.size() != region_dirichlet.front().size() || v.empty()) {
            throw DomainError("simulation: Dirichlet vectors must share a length");
        }
        for (double a : v) {
            if (!(a > 0.0)) {
                throw DomainError("simulation: Dirichlet parameters must be positive");
            }
        }
    }
    if (beta0_override && beta0_override->size() != n_samples) {
        throw DomainError("simulation: beta0 override needs one value per sample");
    }
    setting_tier(setting, 0);
}

SimulatedData generate(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t M = cfg.n_samples;
    const std::size_t rows = cfg.grid_rows;
    const std::size_t cols = cfg.grid_cols;
    const std::size_t n = rows * cols;
    const std::size_t G = cfg.n_genes;
    const std::size_t K = cfg.region_dirichlet.front().size();

    SimulatedData out;
    GroundTruth& truth = out.truth;
    truth.run = RunInfo{cfg.seed, cfg.setting, pattern_name(cfg.pattern), cfg.dropout};
    char buf[32];
    for (std::size_t g = 0; g < G; ++g) {
        std::snprintf(buf, sizeof(buf), "gene%05zu", g + 1);
        truth.gene_ids.emplace_back(buf);
        const bool sv = g < cfg.n_sv && cfg.pattern != PatternKind::none;
        truth.is_sv.push_back(sv);
        truth.pattern.push_back(sv ? cfg.pattern : PatternKind::none);
    }
    truth.beta0.assign(G, std::vector<double>(M, 0.0));
    truth.intercept.assign(G, std::vector<double>(M, 0.0));
    truth.covariate_effects.assign(G, std::vector<std::vector<double>>(M));

    const auto tiers = strength_tiers(cfg.pattern);
    std::vector<double> amplitude(M);
    for (std::size_t m = 0; m < M; ++m) {
        amplitude[m] = cfg.beta0_override ? (*cfg.beta0_override)[m] : tiers[static_cast<std::size_t>(setting_tier(cfg.setting, m))];
    }

    for (std::size_t m = 0; m < M; ++m) {
        SpatialSample s;
        s.sample_id = "sample" + std::to_string(m + 1);
        s.gene_ids = truth.gene_ids;
        s.coords.resize(static_cast<Eigen::Index>(n), 2);
        s.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(K));
        for (std::size_t j = 0; j < K; ++j) {
            s.covariate_names.push_back("celltype" + std::to_string(j + 1));
        }
        std::vector<double> e1(n), e2(n);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t i = r * cols + c;
                const auto ii = static_cast<Eigen::Index>(i);
                s.spot_ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
                s.coords(ii, 0) = static_cast<double>(c);
                s.coords(ii, 1) = static_cast<double>(r);
                e1[i] = eval_coordinate(c, cols);
                e2[i] = eval_coordinate(r, rows);
                const std::size_t region = (r >= rows / 2 ? 2 : 0) + (c >= cols / 2 ? 1 : 0);
                double total = 0.0;
                for (std::size_t j = 0; j < K; ++j) {
                    std::gamma_distribution<double> draw(cfg.region_dirichlet[region][j], 1.0);
                    const double v = draw(rng);
                    s.covariates(ii, static_cast<Eigen::Index>(j)) = v;
                    total += v;
                }
                s.covariates.row(ii) /= total;
            }
        }

        Eigen::MatrixXd field_factor;
        if (cfg.pattern == PatternKind::nngp && cfg.n_sv > 0) {
            const double scale_c = cols > 1 ? static_cast<double>(cols - 1) : 1.0;
            const double scale_r = rows > 1 ? static_cast<double>(rows - 1) : 1.0;
            Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    const double dx = (s.coords(static_cast<Eigen::Index>(i), 0) - s.coords(static_cast<Eigen::Index>(j), 0)) / scale_c;
                    const double dy = (s.coords(static_cast<Eigen::Index>(i), 1) - s.coords(static_cast<Eigen::Index>(j), 1)) / scale_r;
                    const double v = cfg.nngp.variance * std::exp(-std::sqrt(dx * dx + dy * dy) / cfg.nngp.length_scale);
                    cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
                    cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
                }
            }
            cov.diagonal().array() += 1e-10;
            field_factor = cov.llt().matrixL();
        }

        s.counts.resize(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(n));
        for (std::size_t g = 0; g < G; ++g) {
            const double eta = cfg.intercept_mean + cfg.intercept_sd * std_normal(rng);
            std::vector<double> psi(K);
            for (auto& v : psi) {
                v = cfg.covariate_sd * std_normal(rng);
            }
            truth.intercept[g][m] = eta;
            truth.covariate_effects[g][m] = psi;

            Eigen::VectorXd spatial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            if (truth.is_sv[g]) {
                if (cfg.pattern == PatternKind::nngp) {
                    truth.beta0[g][m] = cfg.nngp.variance;
                    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
                    for (Eigen::Index i = 0; i < z.size(); ++i) {
                        z(i) = std_normal(rng);
                    }
                    spatial = field_factor * z;
                    const double nugget_sd = std::sqrt(cfg.nngp.nugget);
                    for (Eigen::Index i = 0; i < spatial.size(); ++i) {
                        spatial(i) += nugget_sd * std_normal(rng);
                    }
                } else {
                    truth.beta0[g][m] = amplitude[m];
                    for (std::size_t i = 0; i < n; ++i) {
                        spatial(static_cast<Eigen::Index>(i)) = spatial_effect(cfg.pattern, amplitude[m], e1[i], 0)
                                                                + spatial_effect(cfg.pattern, amplitude[m], e2[i], 1);
                    }
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                double log_mean = eta + spatial(ii);
                for (std::size_t j = 0; j < K; ++j) {
                    log_mean += psi[j] * s.covariates(ii, static_cast<Eigen::Index>(j));
                }
                const double mean = std::exp(log_mean);
                std::gamma_distribution<double> mix(cfg.dispersion, mean / cfg.dispersion);
                const double rate = mix(rng);
                std::poisson_distribution<long long> pois(rate);
                double y = rate > 0.0 ? static_cast<double>(pois(rng)) : 0.0;
                if (unit(rng) < cfg.dropout) {
                    y = 0.0;
                }
                s.counts(static_cast<Eigen::Index>(g), ii) = y;
            }
        }
        out.dataset.samples.push_back(std::move(s));
    }
    out.dataset.gene_ids = truth.gene_ids;
    return out;
}

void write_ground_truth(const GroundTruth& truth, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write ground truth: " + path);
    }
    const std::size_t M = truth.beta0.empty() ? 0 : truth.beta0.front().size();
    out << "# seed=" << truth.run.seed << "\tsetting=" << truth.run.setting << "\tpattern=" << truth.run.pattern
        << "\tdropout=" << format_double(truth.run.dropout) << '\n';
    out << "gene_id\tis_sv\tpattern";
    for (std::size_t m = 0; m < M; ++m) {
        out << "\tbeta0_m" << m + 1;
    }
    out << '\n';
    for (std::size_t g = 0; g < truth.gene_ids.size(); ++g) {
        out << truth.gene_ids[g] << '\t' << (truth.is_sv[g] ? 1 : 0) << '\t' << pattern_name(truth.pattern[g]);
        for (std::size_t m = 0; m < M; ++m) {
            out << '\t' << format_double(truth.beta0[g][m]);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing ground truth: " + path);
    }
}

GroundTruth read_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open ground truth: " + path);
    }
    GroundTruth truth;
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path + ": empty ground truth");
    }
    if (!line.empty() && line[0] == '#') {
        for (const auto& field : split_tabs(line.substr(line.find_first_not_of("# ")))) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            const std::string key = field.substr(0, eq);
            const std::string val = field.substr(eq + 1);
            if (key == "seed") {
                truth.run.seed = std::stoull(val);
            } else if (key == "setting") {
                truth.run.setting = std::stoi(val);
            } else if (key == "pattern") {
                truth.run.pattern = val;
            } else if (key == "dropout") {
                truth.run.dropout = parse_double(val, path);
            }
        }
        if (!std::getline(in, line)) {
            throw DataError(path + ": missing ground-truth header");
        }
    }
    const auto header = split_tabs(line);
    if (header.size() < 3 || header[0] != "gene_id") {
        throw DataError(path + ": not a ground-truth file");
    }
    const std::size_t M = header.size() - 3;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split_tabs(line);
        if (f.size() != header.size()) {
            throw DataError(path + ": row has wrong number of fields");
        }
        truth.gene_ids.push_back(f[0]);
        truth.is_sv.push_back(f[1] == "1");
        truth.pattern.push_back(parse_pattern(f[2]));
        std::vector<double> b(M);
        for (std::size_t m = 0; m < M; ++m) {
            b[m] = parse_double(f[3 + m], path);
        }
        truth.beta0.push_back(std::move(b));
    }
    return truth;
}

} // namespace msvg
