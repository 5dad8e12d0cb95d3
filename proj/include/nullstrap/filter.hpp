#pragma once

#include "nullstrap/nb_glm.hpp"

#include <cstddef>
#include <vector>

namespace nullstrap {

/**
 * Estimated FDP at every candidate threshold:
 *
 *     FDP(t) = #{j : |T~_j| >= t} / max(#{j : |T^_j| >= t}, 1)
 *
 * Candidates are the distinct positive |T^| and |T~| values plus a sentinel
 * one above the largest. FDP is a step function that only jumps at these
 * values, so minimizing over them is exact.
 */
struct FdpCurve {
    std::vector<double> thresholds;          // ascending
    std::vector<double> fdp;
    std::vector<std::size_t> null_exceed;    // numerator
    std::vector<std::size_t> observed_exceed;

    double sentinel() const { return thresholds.back(); }
};

struct NullstrapResult {
    double tau = 0.0;  // +inf when no candidate qualifies
    double effective_q = 0.0;
    bool adjusted = false;
    std::vector<std::size_t> discoveries;  // gene indices, ascending
    FdpCurve curve;
    std::size_t n_tested = 0;
};

// Genes whose observed statistic is missing are left out; a missing null
// statistic counts as 0 (it never reaches a positive threshold).
FdpCurve fdp_curve(const StatisticPair& stats);

// q / (1 + sqrt(log(m) / n)).
double adjust_q(double q, std::size_t m, std::size_t n);

// Smallest candidate t with FDP(t) <= effective_q, or +inf.
double select_threshold(const FdpCurve& curve, double effective_q);

// {j : |T^_j| > tau}, strict.
std::vector<std::size_t> declare_discoveries(const StatisticPair& stats, double tau);

// Curve, (optionally adjusted) threshold and discoveries in one call; `m`
// in the adjustment is the number of genes with an observed statistic.
NullstrapResult nullstrap_filter(const StatisticPair& stats, double q, bool adjust, std::size_t n_samples);

} // namespace nullstrap
