#pragma once

#include "nullstrap/core_model.hpp"
#include "nullstrap/nb_glm.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nullstrap {

enum class Method { Nullstrap, NbglmBh, WilcoxonRaw, WilcoxonNorm };

std::string_view to_string(Method method);       // NULLSTRAP, NBGLM_BH, ...
std::string_view method_flag(Method method);     // nullstrap, nbglm_bh, ...
std::optional<Method> parse_method(std::string_view text);
bool is_wilcoxon(Method method);

struct MethodResult {
    Method method = Method::NbglmBh;
    std::vector<std::optional<double>> p_values;  // nullopt for genes not tested
    std::vector<std::size_t> discoveries;         // gene indices, ascending
};

// Benjamini-Hochberg step-up at level q over the non-missing p-values.
std::vector<std::size_t> bh_discoveries(std::span<const std::optional<double>> p, double q);
std::vector<std::size_t> bh_discoveries(std::span<const double> p, double q);

// Two-sided Wilcoxon rank-sum p-value. Exact null distribution when the
// pooled sample has at most 16 values and no ties; otherwise the normal
// approximation with midranks, tie-corrected variance and continuity
// correction. All values identical gives p = 1.
double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

// The two routes separately; the exact one requires tie-free data.
double wilcoxon_exact_p(std::span<const double> a, std::span<const double> b);
double wilcoxon_normal_p(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kWilcoxonExactLimit = 16;

struct BaselineOptions {
    unsigned threads = 1;
    // Run Wilcoxon on the treatment labels alone even when the design has
    // covariates (instead of failing with COVARIATES_UNSUPPORTED).
    bool ignore_covariates = false;
    FitOptions fit;
};

// NBGLM_BH, WILCOXON_RAW or WILCOXON_NORM followed by BH at level q.
MethodResult run_baseline(Method method, const CountMatrix& counts, const DesignInfo& design,
                          const SizeFactors& s, double q, const BaselineOptions& options = {});

// NBGLM_BH from fits that are already available.
MethodResult nbglm_bh_from_fits(const std::vector<GeneFit>& fits, double q);

} // namespace nullstrap
