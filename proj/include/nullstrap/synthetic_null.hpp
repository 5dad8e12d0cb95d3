#pragma once

#include "nullstrap/core_model.hpp"
#include "nullstrap/nb_glm.hpp"
#include "nullstrap/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace nullstrap {

// Below this dispersion draws come straight from Poisson(mu).
inline constexpr double kPoissonDispersion = 1e-8;

// NB(mean mu, variance mu + phi mu^2) via a gamma-Poisson mixture.
Count sample_nb(double mu, double phi, Rng& rng);

/**
 * Everything needed to draw one synthetic null count matrix.
 *
 * null_means(i, j) = s~_i * exp(alpha_j + z_i' gamma_j): the treatment term
 * is dropped, covariate effects are kept. Genes without a usable fit have a
 * zero mean column and `active[j] == false`; they generate all-zero counts.
 */
struct SyntheticNullSpec {
    Eigen::MatrixXd null_means;                   // n x m
    SizeFactors resampled_size_factors;           // shared by all genes
    std::optional<std::vector<SizeFactors>> per_gene_size_factors;
    std::vector<double> dispersions;              // m, NaN for inactive genes
    std::vector<bool> active;
    std::uint64_t seed = 0;
    std::vector<std::string> sample_ids;
    std::vector<std::string> gene_ids;

    // Size factors to use when refitting gene j.
    const SizeFactors& size_factors_for(std::size_t j) const {
        return per_gene_size_factors ? (*per_gene_size_factors)[j] : resampled_size_factors;
    }
};

struct NullSpecOptions {
    // Draw a separate size-factor resample for every gene instead of one per
    // dataset. Exploratory only.
    bool per_gene_size_factors = false;
};

SyntheticNullSpec build_null_spec(const std::vector<GeneFit>& fits, const DesignInfo& design,
                                  const SizeFactors& s, std::uint64_t seed,
                                  const std::vector<std::string>& sample_ids,
                                  const std::vector<std::string>& gene_ids,
                                  const NullSpecOptions& options = {});

// Independent NB draws per cell; gene j uses the substream (seed, j), so the
// result does not depend on `threads`.
CountMatrix generate_null_matrix(const SyntheticNullSpec& spec, unsigned threads = 1);

} // namespace nullstrap
