#include "nullstrap/filter.hpp"

#include "nullstrap/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nullstrap {

FdpCurve fdp_curve(const StatisticPair& stats) {
    if (stats.observed.size() != stats.null.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{} observed vs {} null statistics", stats.observed.size(), stats.null.size()));
    }
    std::vector<double> observed;
    std::vector<double> null;
    for (std::size_t j = 0; j < stats.observed.size(); ++j) {
        if (!stats.observed[j]) {
            continue;
        }
        observed.push_back(std::abs(*stats.observed[j]));
        null.push_back(stats.null[j] ? std::abs(*stats.null[j]) : 0.0);
    }
    if (observed.empty()) {
        throw Error(ErrorCode::Empty, "no gene has an observed statistic");
    }

    std::vector<double> candidates;
    candidates.reserve(2 * observed.size() + 1);
    for (double v : observed) {
        if (v > 0.0) candidates.push_back(v);
    }
    for (double v : null) {
        if (v > 0.0) candidates.push_back(v);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    const double top = candidates.empty() ? 0.0 : candidates.back();
    candidates.push_back(top + 1.0);

    std::sort(observed.begin(), observed.end());
    std::sort(null.begin(), null.end());
    auto count_at_least = [](const std::vector<double>& sorted, double t) {
        return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    };

    FdpCurve curve;
    curve.thresholds = std::move(candidates);
    const std::size_t k = curve.thresholds.size();
    curve.fdp.resize(k);
    curve.null_exceed.resize(k);
    curve.observed_exceed.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double t = curve.thresholds[c];
        curve.null_exceed[c] = count_at_least(null, t);
        curve.observed_exceed[c] = count_at_least(observed, t);
        curve.fdp[c] = static_cast<double>(curve.null_exceed[c]) /
                       static_cast<double>(std::max<std::size_t>(curve.observed_exceed[c], 1));
    }
    return curve;
}

double adjust_q(double q, std::size_t m, std::size_t n) {
    if (m < 2 || n < 2) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("adjust_q needs m >= 2 and n >= 2 (m={}, n={})", m, n));
    }
    return q / (1.0 + std::sqrt(std::log(static_cast<double>(m)) / static_cast<double>(n)));
}

double select_threshold(const FdpCurve& curve, double effective_q) {
    for (std::size_t c = 0; c < curve.thresholds.size(); ++c) {
        if (curve.fdp[c] <= effective_q) {
            return curve.thresholds[c];
        }
    }
    return std::numeric_limits<double>::infinity();
}

std::vector<std::size_t> declare_discoveries(const StatisticPair& stats, double tau) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < stats.observed.size(); ++j) {
        if (stats.observed[j] && std::abs(*stats.observed[j]) > tau) {
            out.push_back(j);
        }
    }
    return out;
}

NullstrapResult nullstrap_filter(const StatisticPair& stats, double q, bool adjust, std::size_t n_samples) {
    if (!(q > 0.0 && q < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("target FDR must lie in (0, 1), got {}", q));
    }
    NullstrapResult result;
    result.curve = fdp_curve(stats);
    result.n_tested = static_cast<std::size_t>(
        std::count_if(stats.observed.begin(), stats.observed.end(), [](const auto& v) { return v.has_value(); }));
    result.adjusted = adjust && result.n_tested >= 2 && n_samples >= 2;
    result.effective_q = result.adjusted ? adjust_q(q, result.n_tested, n_samples) : q;
    result.tau = select_threshold(result.curve, result.effective_q);
    result.discoveries = declare_discoveries(stats, result.tau);
    return result;
}

} // namespace nullstrap
