#include "nullstrap/nb_glm.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/parallel.hpp"
#include "nullstrap/stats.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nullstrap {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Counts up to this size use the exact finite sum for
// lgamma(y + r) - lgamma(r) - y log r.
constexpr Count kSmallCount = 64;

// lgamma(y + 1/phi) - lgamma(1/phi) + y log(phi): well-behaved as phi -> 0.
double log_rising_factor(Count y, double phi) {
    if (y <= kSmallCount) {
        double acc = 0.0;
        for (Count k = 1; k < y; ++k) {
            acc += std::log1p(static_cast<double>(k) * phi);
        }
        return acc;
    }
    const double r = 1.0 / phi;
    const double yd = static_cast<double>(y);
    return log_gamma(yd + r) - log_gamma(r) + yd * std::log(phi);
}

GeneFit empty_fit(const DesignInfo& design, bool null_model, std::size_t n, FitStatus status) {
    GeneFit fit;
    const int k = design.n_conditions - 1;
    fit.alpha = kNaN;
    fit.beta = Eigen::VectorXd::Zero(k);
    fit.gamma = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(design.n_covariates()), kNaN);
    fit.beta_cov = Eigen::MatrixXd::Constant(k, k, null_model ? 0.0 : kNaN);
    fit.se_beta = Eigen::VectorXd::Constant(k, null_model ? 0.0 : kNaN);
    fit.fitted_means = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    fit.status = status;
    fit.null_model = null_model;
    return fit;
}

// Condition estimate after symmetric diagonal scaling, so covariates on
// large numeric scales are not mistaken for collinearity.
double scaled_condition(const Eigen::MatrixXd& info) {
    const Eigen::VectorXd diag = info.diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
        return std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd inv_sqrt = diag.array().rsqrt();
    const Eigen::MatrixXd scaled = inv_sqrt.asDiagonal() * info * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return hi / lo;
}

double moments_from_normalized(std::span<const Count> y, const SizeFactors& s) {
    const std::size_t n = y.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += static_cast<double>(y[i]) / s[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(y[i]) / s[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    if (!(mean > 0.0)) {
        return kMinDispersion;
    }
    return std::max((var - mean) / (mean * mean), kMinDispersion);
}

} // namespace

std::string_view to_string(FitStatus status) {
    switch (status) {
    case FitStatus::Converged: return "CONVERGED";
    case FitStatus::MaxIter: return "MAX_ITER";
    case FitStatus::Singular: return "SINGULAR";
    case FitStatus::AllZero: return "ALL_ZERO";
    }
    return "UNKNOWN";
}

bool GeneFit::usable() const {
    if (status == FitStatus::Converged) {
        return true;
    }
    return status == FitStatus::MaxIter && se_beta.allFinite() && beta.allFinite();
}

double nb_log_likelihood(std::span<const Count> y, std::span<const double> mu, double phi) {
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double yi = static_cast<double>(y[i]);
        const double l1p = std::log1p(phi * mu[i]);
        ll += log_rising_factor(y[i], phi) - log_gamma(yi + 1.0) - l1p / phi;
        if (y[i] > 0) {
            ll += yi * (std::log(mu[i]) - l1p);
        }
    }
    return ll;
}

double nb_deviance(std::span<const Count> y, std::span<const double> mu, double phi) {
    double dev = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double yi = static_cast<double>(y[i]);
        double unit = -(yi + 1.0 / phi) * (std::log1p(phi * yi) - std::log1p(phi * mu[i]));
        if (y[i] > 0) {
            unit += yi * std::log(yi / mu[i]);
        }
        dev += 2.0 * unit;
    }
    return dev;
}

GeneFit fit_nb_glm(std::span<const Count> y, const DesignInfo& design, const SizeFactors& s, double phi,
                   bool null_model, const IrlsControl& control) {
    const std::size_t n = y.size();
    if (n != design.n_samples() || n != s.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("gene has {} counts, design {} samples, {} size factors", n,
                                design.n_samples(), s.size()));
    }
    if (!(phi > 0.0) || !std::isfinite(phi)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("dispersion must be positive, got {}", phi));
    }

    const double total = std::accumulate(y.begin(), y.end(), 0.0,
                                         [](double acc, Count c) { return acc + static_cast<double>(c); });
    if (total == 0.0) {
        GeneFit fit = empty_fit(design, null_model, n, FitStatus::AllZero);
        fit.phi = phi;
        return fit;
    }

    const Eigen::MatrixXd x = design.model_matrix(!null_model);
    const Eigen::Index rows = x.rows();
    const Eigen::Index d = x.cols();
    Eigen::VectorXd offset(rows);
    Eigen::VectorXd yv(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        offset(i) = std::log(s[static_cast<std::size_t>(i)]);
        yv(i) = static_cast<double>(y[static_cast<std::size_t>(i)]);
    }
    const double s_total = std::accumulate(s.values().begin(), s.values().end(), 0.0);

    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    b(0) = std::log(total / s_total);

    auto means_at = [&](const Eigen::VectorXd& coef) -> Eigen::VectorXd {
        return (x * coef + offset).array().exp().matrix();
    };
    auto deviance_at = [&](const Eigen::VectorXd& mu) {
        if (!mu.allFinite() || (mu.array() <= 0.0).any()) {
            return std::numeric_limits<double>::infinity();
        }
        return nb_deviance(y, std::span<const double>(mu.data(), n), phi);
    };
    auto information_at = [&](const Eigen::VectorXd& mu) -> Eigen::MatrixXd {
        const Eigen::VectorXd w = (mu.array() / (1.0 + phi * mu.array())).matrix();
        return x.transpose() * w.asDiagonal() * x;
    };

    Eigen::VectorXd mu = means_at(b);
    double dev = deviance_at(mu);
    FitStatus status = FitStatus::MaxIter;
    int iterations = 0;

    for (int iter = 1; iter <= control.max_iterations; ++iter) {
        const Eigen::VectorXd w = (mu.array() / (1.0 + phi * mu.array())).matrix();
        const Eigen::VectorXd eta = x * b;
        const Eigen::VectorXd z = eta + ((yv - mu).array() / mu.array()).matrix();
        const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        if (scaled_condition(info) > control.max_condition) {
            status = FitStatus::Singular;
            break;
        }
        Eigen::VectorXd b_new = info.ldlt().solve(x.transpose() * (w.array() * z.array()).matrix());
        Eigen::VectorXd mu_new = means_at(b_new);
        double dev_new = deviance_at(mu_new);

        const double slack = 1e-10 * (std::abs(dev) + 1.0);
        int halvings = 0;
        while (!(dev_new <= dev + slack) && halvings < control.max_halvings) {
            b_new = 0.5 * (b + b_new);
            mu_new = means_at(b_new);
            dev_new = deviance_at(mu_new);
            ++halvings;
        }
        iterations = iter;
        if (!(dev_new <= dev + slack)) {
            status = FitStatus::MaxIter;
            break;
        }
        const double change = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1);
        b = std::move(b_new);
        mu = std::move(mu_new);
        dev = dev_new;
        if (change < control.deviance_tolerance) {
            const Eigen::VectorXd resid = ((yv - mu).array() / (1.0 + phi * mu.array())).matrix();
            const double score = (x.transpose() * resid).cwiseAbs().maxCoeff();
            if (score < control.score_tolerance || change < 1e-15) {
                status = FitStatus::Converged;
                break;
            }
        }
    }

    GeneFit fit;
    fit.phi = phi;
    fit.status = status;
    fit.iterations = iterations;
    fit.deviance = dev;
    fit.null_model = null_model;
    fit.fitted_means = mu;

    const int k = design.n_conditions - 1;
    const Eigen::Index kb = null_model ? 0 : k;
    const Eigen::Index p = static_cast<Eigen::Index>(design.n_covariates());
    fit.alpha = b(0);
    fit.beta = null_model ? Eigen::VectorXd::Zero(k) : Eigen::VectorXd(b.segment(1, kb));
    fit.gamma = b.tail(p);

    const Eigen::MatrixXd info = information_at(mu);
    if (status == FitStatus::Singular || scaled_condition(info) > control.max_condition) {
        fit.status = FitStatus::Singular;
        fit.beta_cov = Eigen::MatrixXd::Constant(k, k, null_model ? 0.0 : kNaN);
        fit.se_beta = Eigen::VectorXd::Constant(k, null_model ? 0.0 : kNaN);
        if (!null_model) {
            fit.beta.setConstant(kNaN);
        }
        return fit;
    }
    if (null_model) {
        fit.beta_cov = Eigen::MatrixXd::Zero(k, k);
        fit.se_beta = Eigen::VectorXd::Zero(k);
        return fit;
    }
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd block = cov.block(1, 1, kb, kb);
    fit.beta_cov = 0.5 * (block + block.transpose());
    fit.se_beta = fit.beta_cov.diagonal().array().sqrt().matrix();
    return fit;
}

double moments_dispersion(std::span<const Count> y, const SizeFactors& s) {
    if (y.size() != s.size()) {
        throw Error(ErrorCode::DimensionMismatch, "counts and size factors differ in length");
    }
    return moments_from_normalized(y, s);
}

DispersionEstimate estimate_dispersion(std::span<const Count> y, const DesignInfo& design, const SizeFactors& s,
                                       const std::optional<DispersionPrior>& prior,
                                       const IrlsControl& control, DispersionMethod method) {
    const double lo = std::log(kMinDispersion);
    const double hi = std::log(kMaxDispersion);
    const double initial = std::clamp(moments_dispersion(y, s), kMinDispersion, kMaxDispersion);

    DispersionEstimate est;
    est.phi = initial;
    est.at_lower_bound = initial <= kMinDispersion;
    GeneFit fit = fit_nb_glm(y, design, s, est.phi, false, control);
    if (fit.status == FitStatus::AllZero || fit.status == FitStatus::Singular) {
        return est;
    }

    const std::size_t n = y.size();
    const Eigen::MatrixXd x = design.model_matrix(true);
    for (int outer = 0; outer < 25; ++outer) {
        const Eigen::VectorXd mu = fit.fitted_means;
        const std::span<const double> mu_span(mu.data(), n);
        auto objective = [&](double log_phi) {
            const double phi = std::exp(log_phi);
            double value = -nb_log_likelihood(y, mu_span, phi);
            if (method == DispersionMethod::CoxReid) {
                const Eigen::VectorXd w = (mu.array() / (1.0 + phi * mu.array())).matrix();
                const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
                value += 0.5 * info.ldlt().vectorD().array().log().sum();
            }
            if (prior) {
                const double dz = (log_phi - std::log(prior->center)) / prior->log_sd;
                value += 0.5 * dz * dz;
            }
            return value;
        };

        const auto [arg, best] = boost::math::tools::brent_find_minima(objective, lo, hi, 40);
        double next_log = arg;
        bool lower = false;
        if (objective(lo) <= best) {
            next_log = lo;
            lower = true;
        }
        if (!std::isfinite(best) || next_log >= hi - 1e-6) {
            est.phi = initial;
            est.fell_back = true;
            est.at_lower_bound = initial <= kMinDispersion;
            return est;
        }

        const double step = std::abs(next_log - std::log(est.phi));
        est.phi = lower ? kMinDispersion : std::exp(next_log);
        est.at_lower_bound = lower;
        fit = fit_nb_glm(y, design, s, est.phi, false, control);
        if (fit.status == FitStatus::Singular) {
            break;
        }
        if (step < 1e-6) {
            break;
        }
    }
    return est;
}

DispersionTrend fit_dispersion_trend(std::span<const double> base_means, std::span<const double> dispersions) {
    std::vector<std::size_t> use;
    for (std::size_t j = 0; j < base_means.size(); ++j) {
        if (base_means[j] > 0.0 && std::isfinite(dispersions[j]) && dispersions[j] > 100 * kMinDispersion) {
            use.push_back(j);
        }
    }
    DispersionTrend trend{0.1, 1.0};
    if (use.size() < 3) {
        return trend;
    }
    const auto count = static_cast<Eigen::Index>(use.size());
    Eigen::MatrixXd a(count, 2);
    Eigen::VectorXd target(count);
    for (Eigen::Index r = 0; r < count; ++r) {
        const std::size_t j = use[static_cast<std::size_t>(r)];
        a(r, 0) = 1.0;
        a(r, 1) = 1.0 / base_means[j];
        target(r) = dispersions[j];
    }
    for (int iter = 0; iter < 10; ++iter) {
        Eigen::VectorXd fitted(count);
        for (Eigen::Index r = 0; r < count; ++r) {
            fitted(r) = std::max(trend.a0 + trend.a1 * a(r, 1), 1e-6);
        }
        const Eigen::VectorXd w = fitted.array().square().inverse().matrix();
        const Eigen::MatrixXd lhs = a.transpose() * w.asDiagonal() * a;
        const Eigen::Vector2d coef = lhs.ldlt().solve(a.transpose() * (w.array() * target.array()).matrix());
        trend.a0 = std::max(coef(0), 1e-6);
        trend.a1 = std::max(coef(1), 0.0);
    }
    return trend;
}

std::string_view to_string(DispersionMethod method) {
    return method == DispersionMethod::CoxReid ? "cox_reid" : "mle";
}

std::optional<DispersionMethod> parse_dispersion_method(std::string_view text) {
    if (text == "mle") return DispersionMethod::Mle;
    if (text == "cox_reid") return DispersionMethod::CoxReid;
    return std::nullopt;
}

std::string_view to_string(StatMode mode) {
    switch (mode) {
    case StatMode::WaldQuad: return "wald_quad";
    case StatMode::ScaledWald: return "scaled_wald";
    case StatMode::NegLogP: return "neg_log_p";
    }
    return "unknown";
}

std::optional<StatMode> parse_stat_mode(std::string_view text) {
    if (text == "wald_quad") return StatMode::WaldQuad;
    if (text == "scaled_wald") return StatMode::ScaledWald;
    if (text == "neg_log_p") return StatMode::NegLogP;
    return std::nullopt;
}

StatMode default_stat_mode(int n_conditions) {
    return n_conditions == 2 ? StatMode::ScaledWald : StatMode::NegLogP;
}

namespace {

double quadratic_form(const GeneFit& fit) {
    if (fit.beta.size() == 1) {
        const double z = fit.beta(0) / fit.se_beta(0);
        return z * z;
    }
    const Eigen::VectorXd solved = fit.beta_cov.ldlt().solve(fit.beta);
    return fit.beta.dot(solved);
}

void require_usable(const GeneFit& fit) {
    if (!fit.usable()) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("no Wald statistic for a fit with status {}", to_string(fit.status)));
    }
}

} // namespace

double wald_p_value(const GeneFit& fit) {
    require_usable(fit);
    if (fit.beta.size() == 1) {
        if (fit.beta(0) == 0.0) {
            return 1.0;
        }
        return normal_two_sided_p(fit.beta(0) / fit.se_beta(0));
    }
    return chi_square_upper_tail(quadratic_form(fit), static_cast<double>(fit.beta.size()));
}

double wald_statistic(const GeneFit& fit, StatMode mode) {
    require_usable(fit);
    switch (mode) {
    case StatMode::WaldQuad:
        return quadratic_form(fit);
    case StatMode::ScaledWald:
        if (fit.beta.size() != 1) {
            throw Error(ErrorCode::ModeError,
                        fmt::format("scaled_wald needs two conditions, design has {}", fit.beta.size() + 1));
        }
        return std::abs(fit.beta(0)) / fit.se_beta(0);
    case StatMode::NegLogP:
        return -std::log(std::max(wald_p_value(fit), kMinPValue));
    }
    return 0.0;
}

namespace {

template <typename SizeFactorsFor>
std::vector<GeneFit> fit_genes_impl(const CountMatrix& counts, const DesignInfo& design,
                                    SizeFactorsFor&& sf_for, const std::optional<std::vector<double>>& dispersions,
                                    const FitOptions& options) {
    const std::size_t m = counts.n_genes();
    if (dispersions && dispersions->size() != m) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{} dispersions supplied for {} genes", dispersions->size(), m));
    }
    std::vector<GeneFit> fits(m);

    auto is_all_zero = [&](std::size_t j) {
        const auto y = counts.gene(j);
        return std::all_of(y.begin(), y.end(), [](Count c) { return c == 0; });
    };

    std::vector<std::optional<DispersionPrior>> priors(m);
    if (!dispersions && options.shrink_dispersion) {
        std::vector<double> mle(m, kNaN);
        std::vector<double> base(m, 0.0);
        parallel_for(m, options.threads, [&](std::size_t j) {
            if (is_all_zero(j)) {
                return;
            }
            const auto y = counts.gene(j);
            const SizeFactors& s = sf_for(j);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                acc += static_cast<double>(y[i]) / s[i];
            }
            base[j] = acc / static_cast<double>(y.size());
            mle[j] = estimate_dispersion(y, design, s, std::nullopt, options.irls, options.dispersion).phi;
        });
        const DispersionTrend trend = fit_dispersion_trend(base, mle);
        for (std::size_t j = 0; j < m; ++j) {
            if (base[j] > 0.0) {
                priors[j] = DispersionPrior{trend(base[j]), 0.5};
            }
        }
    }

    parallel_for(m, options.threads, [&](std::size_t j) {
        const auto y = counts.gene(j);
        const SizeFactors& s = sf_for(j);
        if (is_all_zero(j)) {
            fits[j] = fit_nb_glm(y, design, s, dispersions && (*dispersions)[j] > 0.0 ? (*dispersions)[j] : 1.0,
                                 false, options.irls);
            return;
        }
        double phi = 0.0;
        bool fell_back = false;
        if (dispersions) {
            phi = (*dispersions)[j];
        } else {
            const auto est = estimate_dispersion(y, design, s, priors[j], options.irls, options.dispersion);
            phi = est.phi;
            fell_back = est.fell_back;
        }
        fits[j] = fit_nb_glm(y, design, s, phi, false, options.irls);
        fits[j].dispersion_fallback = fell_back;
    });
    return fits;
}

} // namespace

std::vector<GeneFit> fit_all_genes(const CountMatrix& counts, const DesignInfo& design, const SizeFactors& s,
                                   const std::optional<std::vector<double>>& dispersions,
                                   const FitOptions& options) {
    if (s.size() != counts.n_samples()) {
        throw Error(ErrorCode::DimensionMismatch, "size factors do not match the sample count");
    }
    return fit_genes_impl(counts, design, [&](std::size_t) -> const SizeFactors& { return s; }, dispersions,
                          options);
}

std::vector<GeneFit> fit_all_genes(const CountMatrix& counts, const DesignInfo& design,
                                   std::span<const SizeFactors> per_gene_size_factors,
                                   const std::optional<std::vector<double>>& dispersions,
                                   const FitOptions& options) {
    if (per_gene_size_factors.size() != counts.n_genes()) {
        throw Error(ErrorCode::DimensionMismatch, "need one size-factor vector per gene");
    }
    return fit_genes_impl(counts, design,
                          [&](std::size_t j) -> const SizeFactors& { return per_gene_size_factors[j]; },
                          dispersions, options);
}

std::vector<std::optional<double>> compute_statistics(const std::vector<GeneFit>& fits, StatMode mode) {
    std::vector<std::optional<double>> out(fits.size());
    for (std::size_t j = 0; j < fits.size(); ++j) {
        if (fits[j].usable()) {
            const double t = wald_statistic(fits[j], mode);
            if (std::isfinite(t)) {
                out[j] = t;
            }
        }
    }
    return out;
}

std::vector<std::optional<double>> compute_p_values(const std::vector<GeneFit>& fits) {
    std::vector<std::optional<double>> out(fits.size());
    for (std::size_t j = 0; j < fits.size(); ++j) {
        if (fits[j].usable()) {
            const double p = wald_p_value(fits[j]);
            if (std::isfinite(p)) {
                out[j] = p;
            }
        }
    }
    return out;
}

} // namespace nullstrap
