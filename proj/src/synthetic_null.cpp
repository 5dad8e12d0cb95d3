#include "nullstrap/synthetic_null.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/parallel.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace nullstrap {

Count sample_nb(double mu, double phi, Rng& rng) {
    if (!(mu > 0.0) || !std::isfinite(mu) || !(phi > 0.0) || !std::isfinite(phi)) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("NB draw needs positive finite mean and dispersion (mu={}, phi={})", mu, phi));
    }
    double rate = mu;
    if (phi >= kPoissonDispersion) {
        std::gamma_distribution<double> gamma(1.0 / phi, phi * mu);
        rate = gamma(rng);
        if (!(rate > 0.0)) {
            return 0;
        }
    }
    std::poisson_distribution<Count> poisson(rate);
    return poisson(rng);
}

SyntheticNullSpec build_null_spec(const std::vector<GeneFit>& fits, const DesignInfo& design,
                                  const SizeFactors& s, std::uint64_t seed,
                                  const std::vector<std::string>& sample_ids,
                                  const std::vector<std::string>& gene_ids, const NullSpecOptions& options) {
    const std::size_t n = s.size();
    const std::size_t m = fits.size();
    if (design.n_samples() != n || gene_ids.size() != m || sample_ids.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "fits, design and size factors disagree in shape");
    }

    auto resample = [&](Rng& rng) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> out(n);
        for (auto& v : out) {
            v = s[pick(rng)];
        }
        return SizeFactors(std::move(out));
    };

    SyntheticNullSpec spec;
    spec.seed = seed;
    spec.sample_ids = sample_ids;
    spec.gene_ids = gene_ids;
    Rng sf_rng = make_stream(seed, {stream::size_factors});
    spec.resampled_size_factors = resample(sf_rng);
    if (options.per_gene_size_factors) {
        std::vector<SizeFactors> per_gene;
        per_gene.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            Rng rng = make_stream(seed, {stream::size_factors, j});
            per_gene.push_back(resample(rng));
        }
        spec.per_gene_size_factors = std::move(per_gene);
    }

    spec.null_means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    spec.dispersions.assign(m, std::numeric_limits<double>::quiet_NaN());
    spec.active.assign(m, false);
    const Eigen::MatrixXd& z = design.covariates;
    for (std::size_t j = 0; j < m; ++j) {
        const GeneFit& fit = fits[j];
        if (!fit.usable() || !std::isfinite(fit.alpha) || !fit.gamma.allFinite()) {
            continue;
        }
        const SizeFactors& sf = spec.size_factors_for(j);
        for (std::size_t i = 0; i < n; ++i) {
            double eta = std::log(sf[i]) + fit.alpha;
            if (z.cols() > 0) {
                eta += z.row(static_cast<Eigen::Index>(i)).dot(fit.gamma);
            }
            spec.null_means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(eta);
        }
        spec.dispersions[j] = fit.phi;
        spec.active[j] = true;
    }
    return spec;
}

CountMatrix generate_null_matrix(const SyntheticNullSpec& spec, unsigned threads) {
    const std::size_t n = static_cast<std::size_t>(spec.null_means.rows());
    const std::size_t m = static_cast<std::size_t>(spec.null_means.cols());
    std::vector<Count> data(n * m, 0);
    parallel_for(m, threads, [&](std::size_t j) {
        if (!spec.active[j]) {
            return;
        }
        Rng rng = make_stream(spec.seed, {stream::counts, j});
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = spec.null_means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            // Means that underflow to zero can only produce zeros.
            data[j * n + i] = mu > 0.0 ? sample_nb(mu, spec.dispersions[j], rng) : 0;
        }
    });
    return CountMatrix(spec.sample_ids, spec.gene_ids, std::move(data));
}

} // namespace nullstrap
