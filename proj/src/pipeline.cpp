#include "nullstrap/pipeline.hpp"

#include "nullstrap/errors.hpp"

namespace nullstrap {

RealFit fit_real_data(const CountMatrix& counts, const DesignInfo& design, const NullstrapOptions& options) {
    RealFit real;
    real.size_factors = estimate_size_factors(counts);
    FitOptions fit_options;
    fit_options.threads = options.threads;
    fit_options.dispersion = options.dispersion;
    fit_options.shrink_dispersion = options.shrink_dispersion;
    fit_options.irls = options.irls;
    real.fits = fit_all_genes(counts, design, real.size_factors, std::nullopt, fit_options);
    return real;
}

NullstrapRun run_nullstrap_from_fits(const CountMatrix& counts, const DesignInfo& design, RealFit real,
                                     const NullstrapOptions& options) {
    const StatMode mode = options.mode.value_or(default_stat_mode(design.n_conditions));
    if (mode == StatMode::ScaledWald && design.n_conditions != 2) {
        throw Error(ErrorCode::ModeError, "scaled_wald needs exactly two conditions");
    }

    NullstrapRun run;
    run.size_factors = std::move(real.size_factors);
    run.fits = std::move(real.fits);
    run.stats.mode = mode;
    run.stats.df = design.n_conditions - 1;
    run.stats.observed = compute_statistics(run.fits, mode);

    NullSpecOptions spec_options;
    spec_options.per_gene_size_factors = options.per_gene_size_factors;
    run.null_spec = build_null_spec(run.fits, design, run.size_factors, derive_seed(options.seed, {stream::nullstrap}),
                                    counts.sample_ids(), counts.gene_ids(), spec_options);
    run.null_counts = generate_null_matrix(run.null_spec, options.threads);

    FitOptions fit_options;
    fit_options.threads = options.threads;
    fit_options.irls = options.irls;
    std::vector<double> fixed = run.null_spec.dispersions;
    if (run.null_spec.per_gene_size_factors) {
        run.null_fits = fit_all_genes(run.null_counts, design, *run.null_spec.per_gene_size_factors, fixed,
                                      fit_options);
    } else {
        run.null_fits = fit_all_genes(run.null_counts, design, run.null_spec.resampled_size_factors, fixed,
                                      fit_options);
    }
    run.stats.null = compute_statistics(run.null_fits, mode);
    for (std::size_t j = 0; j < run.stats.null.size(); ++j) {
        if (!run.null_spec.active[j]) {
            run.stats.null[j].reset();
        }
    }

    run.result = nullstrap_filter(run.stats, options.q, options.adjust, counts.n_samples());
    return run;
}

NullstrapRun run_nullstrap(const ValidatedDataset& data, const NullstrapOptions& options) {
    RealFit real = fit_real_data(data.counts, data.design, options);
    return run_nullstrap_from_fits(data.counts, data.design, std::move(real), options);
}

} // namespace nullstrap
