#include "fixtures.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/nb_glm.hpp"
#include "nullstrap/pipeline.hpp"
#include "nullstrap/synthetic_null.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace nullstrap;

namespace {

struct Moments {
    double mean;
    double var;
};

Moments draw_moments(double mu, double phi, std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const double v = static_cast<double>(sample_nb(mu, phi, rng));
        sum += v;
        sq += v * v;
    }
    const double mean = sum / static_cast<double>(draws);
    return {mean, (sq - static_cast<double>(draws) * mean * mean) / static_cast<double>(draws - 1)};
}

// Fits where every gene has the given alpha, one covariate effect and phi.
std::vector<GeneFit> stub_fits(std::size_t m, double alpha, double gamma, double phi) {
    std::vector<GeneFit> fits(m);
    for (auto& f : fits) {
        f.alpha = alpha + 0.01 * static_cast<double>(&f - fits.data());
        f.beta = Eigen::VectorXd::Constant(1, 1.7);
        f.gamma = Eigen::VectorXd::Constant(1, gamma);
        f.phi = phi;
        f.status = FitStatus::Converged;
        f.se_beta = Eigen::VectorXd::Constant(1, 0.2);
        f.beta_cov = Eigen::MatrixXd::Constant(1, 1, 0.04);
    }
    return fits;
}

DesignInfo covariate_design(std::size_t n) {
    auto d = fixture::two_group(n);
    d.covariates = Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) d.covariates(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i % 3 == 0);
    return d;
}

std::vector<std::string> names(const char* prefix, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

} // namespace

TEST_CASE("sampler reproduces NB mean and variance") {
    struct Case {
        double mu, phi;
    };
    for (const Case c : {Case{5, 0.01}, Case{10, 0.5}, Case{100, 2.0}}) {
        const std::size_t draws = 200000;
        const auto got = draw_moments(c.mu, c.phi, draws, 11);
        const double var = c.mu + c.phi * c.mu * c.mu;
        CHECK(std::abs(got.mean - c.mu) < 4.0 * std::sqrt(var / draws));
        // Relative error of a sample variance is roughly sqrt(kurtosis / draws);
        // 5% is far outside that for these cases.
        CHECK(got.var == doctest::Approx(var).epsilon(0.05));
    }
}

TEST_CASE("tiny dispersion draws are Poisson") {
    const auto got = draw_moments(7.0, 1e-12, 200000, 3);
    CHECK(got.mean == doctest::Approx(7.0).epsilon(0.01));
    CHECK(got.var == doctest::Approx(7.0).epsilon(0.03));
}

TEST_CASE("sampler rejects invalid parameters") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_nb(-1.0, 0.1, rng), Error);
    CHECK_THROWS_AS(sample_nb(1.0, 0.0, rng), Error);
    CHECK_THROWS_AS(sample_nb(NAN, 0.1, rng), Error);
}

TEST_CASE("null means drop the treatment term and keep covariates") {
    const std::size_t n = 9, m = 4;
    const auto design = covariate_design(n);
    auto fits = stub_fits(m, 2.0, 0.8, 0.3);
    const SizeFactors s({0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9, 2.1});
    const auto spec = build_null_spec(fits, design, s, 99, names("s", n), names("g", m));
    const std::set<double> original(s.values().begin(), s.values().end());
    for (std::size_t i = 0; i < n; ++i) CHECK(original.count(spec.resampled_size_factors[i]) == 1);
    for (std::size_t j = 0; j < m; ++j) {
        CHECK(spec.active[j]);
        CHECK(spec.dispersions[j] == 0.3);
        for (std::size_t i = 0; i < n; ++i) {
            const double expected = spec.resampled_size_factors[i] *
                                    std::exp(fits[j].alpha + design.covariates(static_cast<Eigen::Index>(i), 0) * 0.8);
            CHECK(spec.null_means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("genes without a usable fit produce zero columns") {
    const std::size_t n = 6, m = 3;
    const auto design = fixture::two_group(n);
    auto fits = stub_fits(m, 3.0, 0.0, 0.2);
    for (auto& f : fits) f.gamma.resize(0);
    fits[1].status = FitStatus::Singular;
    const auto spec = build_null_spec(fits, design, SizeFactors::ones(n), 5, names("s", n), names("g", m));
    CHECK_FALSE(spec.active[1]);
    CHECK(std::isnan(spec.dispersions[1]));
    const auto null = generate_null_matrix(spec);
    for (std::size_t i = 0; i < n; ++i) CHECK(null.at(i, 1) == 0);
    Count other = 0;
    for (std::size_t i = 0; i < n; ++i) other += null.at(i, 0);
    CHECK(other > 0);
}

TEST_CASE("null matrix depends on the seed only") {
    const std::size_t n = 8, m = 50;
    const auto design = fixture::two_group(n);
    auto fits = stub_fits(m, 3.0, 0.0, 0.2);
    for (auto& f : fits) f.gamma.resize(0);
    const auto spec = build_null_spec(fits, design, SizeFactors::ones(n), 42, names("s", n), names("g", m));
    const auto a = generate_null_matrix(spec, 1);
    const auto b = generate_null_matrix(spec, 3);
    CHECK(a.data() == b.data());
    const auto spec2 = build_null_spec(fits, design, SizeFactors::ones(n), 43, names("s", n), names("g", m));
    CHECK(generate_null_matrix(spec2).data() != a.data());
}

TEST_CASE("per-gene size factor resampling") {
    const std::size_t n = 6, m = 5;
    auto fits = stub_fits(m, 1.0, 0.0, 0.2);
    for (auto& f : fits) f.gamma.resize(0);
    const SizeFactors s({0.6, 0.8, 1.0, 1.2, 1.4, 1.6});
    NullSpecOptions opts;
    opts.per_gene_size_factors = true;
    const auto spec = build_null_spec(fits, fixture::two_group(n), s, 8, names("s", n), names("g", m), opts);
    REQUIRE(spec.per_gene_size_factors.has_value());
    bool differs = false;
    for (std::size_t j = 1; j < m; ++j) differs |= spec.size_factors_for(j).values() != spec.size_factors_for(0).values();
    CHECK(differs);
}

TEST_CASE("synthetic null coefficients sit near zero") {
    // Strong effects in the first 80 genes; the null refit should not carry
    // them over.
    Rng rng(2);
    const std::size_t n = 12, m = 200;
    std::vector<std::vector<Count>> genes;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<Count> y;
        for (std::size_t i = 0; i < n; ++i) y.push_back(sample_nb(i < n / 2 || j >= 80 ? 30.0 : 120.0, 0.1, rng));
        genes.push_back(y);
    }
    ValidatedDataset data = validate_inputs(fixture::by_gene(genes), fixture::two_group(n));
    NullstrapOptions opts;
    opts.seed = 4;
    const auto run = run_nullstrap(data, opts);
    std::vector<double> real_beta, null_beta, se;
    for (std::size_t j = 0; j < m; ++j) {
        if (!run.fits[j].usable() || !run.null_fits[j].usable()) continue;
        if (j < 80) real_beta.push_back(std::abs(run.fits[j].beta(0)));
        null_beta.push_back(std::abs(run.null_fits[j].beta(0)));
        se.push_back(run.null_fits[j].se_beta(0));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(real_beta) > 0.5);
    CHECK(median(null_beta) < median(se));
    // Null refits keep the real-data dispersions.
    for (std::size_t j = 0; j < m; ++j) {
        if (run.null_fits[j].usable()) CHECK(run.null_fits[j].phi == run.fits[j].phi);
    }
}

TEST_CASE("pipeline is reproducible and thread independent") {
    Rng rng(9);
    const std::size_t n = 8, m = 80;
    std::vector<std::vector<Count>> genes;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<Count> y;
        const double fc = j < 10 ? 6.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) y.push_back(sample_nb(i < n / 2 ? 40.0 : 40.0 * fc, 0.05, rng));
        genes.push_back(y);
    }
    genes.push_back(std::vector<Count>(n, 0));
    ValidatedDataset data = validate_inputs(fixture::by_gene(genes), fixture::two_group(n));
    NullstrapOptions one;
    one.q = 0.1;
    NullstrapOptions three = one;
    three.threads = 3;
    const auto a = run_nullstrap(data, one);
    const auto b = run_nullstrap(data, three);
    CHECK(a.null_counts.data() == b.null_counts.data());
    CHECK(a.result.discoveries == b.result.discoveries);
    CHECK(a.result.tau == b.result.tau);
    CHECK_FALSE(a.stats.observed.back().has_value());
    CHECK_FALSE(a.stats.null.back().has_value());
    CHECK_FALSE(a.result.discoveries.empty());
    NullstrapOptions other = one;
    other.seed = 2;
    CHECK(run_nullstrap(data, other).null_counts.data() != a.null_counts.data());
}
