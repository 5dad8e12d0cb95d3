#pragma once

#include "nullstrap/core_model.hpp"
#include "nullstrap/filter.hpp"
#include "nullstrap/nb_glm.hpp"
#include "nullstrap/synthetic_null.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace nullstrap {

struct NullstrapOptions {
    double q = 0.05;
    bool adjust = true;
    std::optional<StatMode> mode;  // default_stat_mode(K) when unset
    std::uint64_t seed = 1;
    unsigned threads = 1;
    DispersionMethod dispersion = DispersionMethod::CoxReid;
    bool shrink_dispersion = true;
    bool per_gene_size_factors = false;
    IrlsControl irls;
};

// Everything produced along the way, kept for reporting and dumps.
struct NullstrapRun {
    SizeFactors size_factors;
    std::vector<GeneFit> fits;
    SyntheticNullSpec null_spec;
    CountMatrix null_counts;
    std::vector<GeneFit> null_fits;
    StatisticPair stats;
    NullstrapResult result;
};

// Real-data fits (size factors, dispersions, coefficients).
struct RealFit {
    SizeFactors size_factors;
    std::vector<GeneFit> fits;
};

RealFit fit_real_data(const CountMatrix& counts, const DesignInfo& design, const NullstrapOptions& options);

// Synthetic null generation, refit with s~ and phi^ held fixed, threshold
// and discoveries, starting from existing real-data fits.
NullstrapRun run_nullstrap_from_fits(const CountMatrix& counts, const DesignInfo& design, RealFit real,
                                     const NullstrapOptions& options);

// The complete procedure: fit real data, generate and fit a synthetic null,
// threshold, declare discoveries.
NullstrapRun run_nullstrap(const ValidatedDataset& data, const NullstrapOptions& options);

} // namespace nullstrap
