#pragma once

#include "nullstrap/core_model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nullstrap {

enum class FitStatus { Converged, MaxIter, Singular, AllZero };

std::string_view to_string(FitStatus status);

struct IrlsControl {
    int max_iterations = 50;
    double deviance_tolerance = 1e-8;  // relative change
    // Largest score component allowed at convergence, on top of the deviance
    // rule. Ignored once the deviance stops moving at machine precision.
    double score_tolerance = 1e-9;
    int max_halvings = 10;
    double max_condition = 1e12;
};

/**
 * One gene's negative-binomial GLM fit on the log scale:
 *
 *     log mu_i = log s_i + alpha + x_i' beta + z_i' gamma,   Var = mu + phi mu^2
 *
 * `beta_cov` is the treatment block of the inverse Fisher information at
 * the returned parameters. Genes that ended in MAX_ITER keep their last
 * iterate; SINGULAR and ALL_ZERO fits carry NaN estimates.
 */
struct GeneFit {
    double alpha = 0.0;
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    double phi = 0.0;
    Eigen::MatrixXd beta_cov;
    Eigen::VectorXd se_beta;
    Eigen::VectorXd fitted_means;
    FitStatus status = FitStatus::AllZero;
    int iterations = 0;
    double deviance = 0.0;
    bool null_model = false;
    bool dispersion_fallback = false;

    // True when the fit can feed a test statistic: CONVERGED, or MAX_ITER
    // with finite standard errors.
    bool usable() const;
};

inline constexpr double kMinDispersion = 1e-8;
inline constexpr double kMaxDispersion = 1e4;

// Full NB log-likelihood (including the log y! term) at means `mu`.
double nb_log_likelihood(std::span<const Count> y, std::span<const double> mu, double phi);

// 2 * (saturated log-likelihood - log-likelihood).
double nb_deviance(std::span<const Count> y, std::span<const double> mu, double phi);

// Maximizes the NB likelihood for fixed `phi` by IRLS with offset log s_i.
// With `null_model` the treatment block is dropped and beta is returned as 0.
GeneFit fit_nb_glm(std::span<const Count> y, const DesignInfo& design, const SizeFactors& s, double phi,
                   bool null_model = false, const IrlsControl& control = {});

// max((var - mean) / mean^2, 1e-8) on y_i / s_i (sample variance, n - 1).
double moments_dispersion(std::span<const Count> y, const SizeFactors& s);

// Log-normal prior on phi centred at `center` (phi scale).
struct DispersionPrior {
    double center = 0.1;
    double log_sd = 0.5;
};

struct DispersionEstimate {
    double phi = kMinDispersion;
    bool fell_back = false;  // profile search hit the upper bound; moments value returned
    bool at_lower_bound = false;
};

// MLE maximizes the profile likelihood. COX_REID subtracts
// 0.5 log det(X' W X), W = diag(mu / (1 + phi mu)), which removes most of the
// downward small-sample bias of the plain MLE.
enum class DispersionMethod { Mle, CoxReid };

std::string_view to_string(DispersionMethod method);
std::optional<DispersionMethod> parse_dispersion_method(std::string_view text);

// Maximizer (or MAP under `prior`) of the chosen profile criterion in
// log phi over [1e-8, 1e4], alternating a Brent search with IRLS refits of
// the mean model.
DispersionEstimate estimate_dispersion(std::span<const Count> y, const DesignInfo& design,
                                       const SizeFactors& s,
                                       const std::optional<DispersionPrior>& prior = std::nullopt,
                                       const IrlsControl& control = {},
                                       DispersionMethod method = DispersionMethod::Mle);

// phi_tr(mu) = a0 + a1 / mu, fitted as a gamma-family GLM with identity link.
struct DispersionTrend {
    double a0 = 0.0;
    double a1 = 0.0;

    double operator()(double mean) const { return a0 + a1 / mean; }
};

DispersionTrend fit_dispersion_trend(std::span<const double> base_means, std::span<const double> dispersions);

enum class StatMode { WaldQuad, ScaledWald, NegLogP };

std::string_view to_string(StatMode mode);
std::optional<StatMode> parse_stat_mode(std::string_view text);

// SCALED_WALD for two conditions, NEG_LOG_P otherwise.
StatMode default_stat_mode(int n_conditions);

inline constexpr double kMinPValue = 1e-300;

// WALD_QUAD: beta' Cov^-1 beta. SCALED_WALD: |beta| / se (K = 2 only).
// NEG_LOG_P: -log(max(p, 1e-300)).
double wald_statistic(const GeneFit& fit, StatMode mode);

// K = 2: two-sided normal tail of beta / se. K > 2: chi-square upper tail
// with K - 1 degrees of freedom at the quadratic form.
double wald_p_value(const GeneFit& fit);

struct FitOptions {
    unsigned threads = 1;
    DispersionMethod dispersion = DispersionMethod::CoxReid;
    // Log-normal prior centred on the fitted mean-dispersion trend.
    bool shrink_dispersion = true;
    IrlsControl irls;
};

// Dispersion estimation (unless `dispersions` is given) followed by the full
// model fit, for every gene. Output order matches gene order; single-gene
// failures are reported through the fit status.
std::vector<GeneFit> fit_all_genes(const CountMatrix& counts, const DesignInfo& design, const SizeFactors& s,
                                   const std::optional<std::vector<double>>& dispersions = std::nullopt,
                                   const FitOptions& options = {});

// Same, with a separate size-factor vector per gene.
std::vector<GeneFit> fit_all_genes(const CountMatrix& counts, const DesignInfo& design,
                                   std::span<const SizeFactors> per_gene_size_factors,
                                   const std::optional<std::vector<double>>& dispersions = std::nullopt,
                                   const FitOptions& options = {});

// Observed and synthetic-null statistics; nullopt marks a gene without a
// usable fit.
struct StatisticPair {
    std::vector<std::optional<double>> observed;
    std::vector<std::optional<double>> null;
    StatMode mode = StatMode::ScaledWald;
    int df = 1;
};

std::vector<std::optional<double>> compute_statistics(const std::vector<GeneFit>& fits, StatMode mode);

std::vector<std::optional<double>> compute_p_values(const std::vector<GeneFit>& fits);

} // namespace nullstrap
