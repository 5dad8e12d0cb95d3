#include "nullstrap/baselines.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/parallel.hpp"
#include "nullstrap/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nullstrap {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::Nullstrap: return "NULLSTRAP";
    case Method::NbglmBh: return "NBGLM_BH";
    case Method::WilcoxonRaw: return "WILCOXON_RAW";
    case Method::WilcoxonNorm: return "WILCOXON_NORM";
    }
    return "UNKNOWN";
}

std::string_view method_flag(Method method) {
    switch (method) {
    case Method::Nullstrap: return "nullstrap";
    case Method::NbglmBh: return "nbglm_bh";
    case Method::WilcoxonRaw: return "wilcoxon_raw";
    case Method::WilcoxonNorm: return "wilcoxon_norm";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view text) {
    for (Method m : {Method::Nullstrap, Method::NbglmBh, Method::WilcoxonRaw, Method::WilcoxonNorm}) {
        if (text == method_flag(m) || text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

bool is_wilcoxon(Method method) {
    return method == Method::WilcoxonRaw || method == Method::WilcoxonNorm;
}

std::vector<std::size_t> bh_discoveries(std::span<const std::optional<double>> p, double q) {
    std::vector<std::size_t> tested;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j]) {
            tested.push_back(j);
        }
    }
    std::sort(tested.begin(), tested.end(), [&](std::size_t l, std::size_t r) {
        return *p[l] < *p[r] || (*p[l] == *p[r] && l < r);
    });
    const double m = static_cast<double>(tested.size());
    std::size_t cut = 0;  // number of rejections
    for (std::size_t i = tested.size(); i > 0; --i) {
        if (*p[tested[i - 1]] <= static_cast<double>(i) * q / m) {
            cut = i;
            break;
        }
    }
    if (cut == 0) {
        return {};
    }
    const double bound = *p[tested[cut - 1]];
    std::vector<std::size_t> out;
    for (std::size_t j : tested) {
        if (*p[j] <= bound) {
            out.push_back(j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> bh_discoveries(std::span<const double> p, double q) {
    std::vector<std::optional<double>> wrapped(p.begin(), p.end());
    return bh_discoveries(std::span<const std::optional<double>>(wrapped), q);
}

namespace {

struct RankSummary {
    double rank_sum_a = 0.0;
    double tie_term = 0.0;  // sum of t^3 - t over tie groups
    bool ties = false;
};

RankSummary rank_summary(std::span<const double> a, std::span<const double> b) {
    const std::size_t na = a.size();
    const std::size_t total = na + b.size();
    std::vector<std::pair<double, bool>> pooled;
    pooled.reserve(total);
    for (double v : a) pooled.emplace_back(v, true);
    for (double v : b) pooled.emplace_back(v, false);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });

    RankSummary out;
    std::size_t i = 0;
    while (i < total) {
        std::size_t k = i;
        while (k + 1 < total && pooled[k + 1].first == pooled[i].first) {
            ++k;
        }
        const double t = static_cast<double>(k - i + 1);
        const double midrank = 0.5 * static_cast<double>(i + 1 + k + 1);
        for (std::size_t r = i; r <= k; ++r) {
            if (pooled[r].second) {
                out.rank_sum_a += midrank;
            }
        }
        if (t > 1.0) {
            out.ties = true;
            out.tie_term += t * t * t - t;
        }
        i = k + 1;
    }
    return out;
}

void require_nonempty(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorCode::InvalidArgument, "Wilcoxon test needs two non-empty groups");
    }
}

} // namespace

double wilcoxon_exact_p(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    const RankSummary ranks = rank_summary(a, b);
    if (ranks.ties) {
        throw Error(ErrorCode::InvalidArgument, "exact Wilcoxon distribution needs tie-free data");
    }
    const std::size_t na = a.size();
    const std::size_t total = na + b.size();
    const std::size_t max_sum = total * (total + 1) / 2;

    // ways[k][s]: subsets of size k of the ranks seen so far summing to s.
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t rank = 1; rank <= total; ++rank) {
        for (std::size_t k = std::min(rank, na); k >= 1; --k) {
            for (std::size_t s = max_sum; s >= rank; --s) {
                ways[k][s] += ways[k - 1][s - rank];
            }
        }
    }
    const auto w = static_cast<std::size_t>(std::llround(ranks.rank_sum_a));
    double all = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
        all += ways[na][s];
        if (s <= w) lower += ways[na][s];
        if (s >= w) upper += ways[na][s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double wilcoxon_normal_p(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    const RankSummary ranks = rank_summary(a, b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double total = na + nb;
    const double variance =
        na * nb / 12.0 * ((total + 1.0) - ranks.tie_term / (total * (total - 1.0)));
    if (!(variance > 0.0)) {
        return 1.0;
    }
    const double centred = ranks.rank_sum_a - na * (total + 1.0) / 2.0;
    const double correction = centred > 0.0 ? 0.5 : (centred < 0.0 ? -0.5 : 0.0);
    const double z = (centred - correction) / std::sqrt(variance);
    return normal_two_sided_p(z);
}

double wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b);
    const RankSummary ranks = rank_summary(a, b);
    if (!ranks.ties && a.size() + b.size() <= kWilcoxonExactLimit) {
        return wilcoxon_exact_p(a, b);
    }
    return wilcoxon_normal_p(a, b);
}

MethodResult nbglm_bh_from_fits(const std::vector<GeneFit>& fits, double q) {
    MethodResult out;
    out.method = Method::NbglmBh;
    out.p_values = compute_p_values(fits);
    out.discoveries = bh_discoveries(std::span<const std::optional<double>>(out.p_values), q);
    return out;
}

MethodResult run_baseline(Method method, const CountMatrix& counts, const DesignInfo& design,
                          const SizeFactors& s, double q, const BaselineOptions& options) {
    if (method == Method::Nullstrap) {
        throw Error(ErrorCode::InvalidArgument, "NULLSTRAP is not a baseline; use run_nullstrap");
    }
    if (method == Method::NbglmBh) {
        FitOptions fit = options.fit;
        fit.threads = options.threads;
        return nbglm_bh_from_fits(fit_all_genes(counts, design, s, std::nullopt, fit), q);
    }

    if (design.n_conditions != 2) {
        throw InputError(ErrorCode::InvalidArgument,
                         fmt::format("{} needs exactly two conditions, design has {}", to_string(method),
                                     design.n_conditions));
    }
    if (design.n_covariates() > 0 && !options.ignore_covariates) {
        throw InputError(ErrorCode::CovariatesUnsupported,
                         fmt::format("{} cannot adjust for covariates", to_string(method)));
    }

    const std::size_t n = counts.n_samples();
    const std::size_t m = counts.n_genes();
    const bool normalized = method == Method::WilcoxonNorm;
    MethodResult out;
    out.method = method;
    out.p_values.assign(m, std::nullopt);
    parallel_for(m, options.threads, [&](std::size_t j) {
        const auto y = counts.gene(j);
        if (std::all_of(y.begin(), y.end(), [](Count c) { return c == 0; })) {
            return;
        }
        std::vector<double> treated;
        std::vector<double> reference;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = normalized ? static_cast<double>(y[i]) / s[i] : static_cast<double>(y[i]);
            (design.treatment[i] == 1 ? treated : reference).push_back(v);
        }
        out.p_values[j] = wilcoxon_rank_sum(treated, reference);
    });
    out.discoveries = bh_discoveries(std::span<const std::optional<double>>(out.p_values), q);
    return out;
}

} // namespace nullstrap
