#include "nullstrap/errors.hpp"
#include "nullstrap/sim_harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

using namespace nullstrap;

namespace {

SimulationConfig small_config() {
    SimulationConfig c;
    c.n = 8;
    c.m = 200;
    c.pi_de = 0.1;
    c.fc = 3.0;
    c.q = 0.1;
    c.replicates = 3;
    c.seed = 11;
    return c;
}

HarnessMethod stub(std::string label, std::function<std::vector<std::size_t>(MethodContext&, double)> run,
                   bool covariates = true) {
    HarnessMethod h;
    h.label = std::move(label);
    h.supports_covariates = covariates;
    h.run = std::move(run);
    return h;
}

} // namespace

TEST_CASE("truth labels partition the genes") {
    auto c = small_config();
    for (double pi : {0.1, 0.15, 0.2}) {
        c.pi_de = pi;
        const auto ds = generate_dataset(c, 0);
        CHECK(ds.truth.de_set.size() == static_cast<std::size_t>(std::llround(pi * 200)));
        CHECK(ds.truth.de_set.size() + ds.truth.null_set.size() == c.m);
        std::set<std::size_t> all(ds.truth.de_set.begin(), ds.truth.de_set.end());
        all.insert(ds.truth.null_set.begin(), ds.truth.null_set.end());
        CHECK(all.size() == c.m);
        CHECK(std::is_sorted(ds.truth.de_set.begin(), ds.truth.de_set.end()));
        for (std::size_t j : ds.truth.null_set) CHECK(ds.truth.true_beta[j] == 0.0);
        for (std::size_t j : ds.truth.de_set) CHECK(std::abs(ds.truth.true_beta[j]) == doctest::Approx(std::log(3.0)));
    }
    c.all_up = true;
    const auto up = generate_dataset(c, 0);
    for (std::size_t j : up.truth.de_set) CHECK(up.truth.true_beta[j] > 0.0);
}

TEST_CASE("dataset layout") {
    const auto ds = generate_dataset(small_config(), 1);
    CHECK(ds.counts.n_samples() == 8);
    CHECK(ds.counts.n_genes() == 200);
    CHECK(ds.counts.sample_ids().front() == "ctrl_1");
    CHECK(ds.counts.sample_ids().back() == "trt_4");
    CHECK(ds.counts.gene_ids().front() == "gene00001");
    CHECK(ds.design.treatment == std::vector<int>{2, 2, 2, 2, 1, 1, 1, 1});
    CHECK(ds.design.n_covariates() == 0);
    for (double s : ds.size_factors) {
        CHECK(s >= 0.9);
        CHECK(s <= 1.1);
    }
}

TEST_CASE("builtin gene parameters") {
    Rng rng(3);
    const auto params = load_gene_params(nullptr, 5000, rng);
    std::vector<double> logs;
    for (const auto& p : params) {
        CHECK(p.base_mean >= 1.0);
        CHECK(p.dispersion > 0.05);
        logs.push_back(std::log(p.base_mean));
    }
    std::sort(logs.begin(), logs.end());
    CHECK(logs[logs.size() / 2] == doctest::Approx(std::log(50.0)).epsilon(0.03));
}

TEST_CASE("parameter tables") {
    std::istringstream in("base_mean\tdispersion\n10\t0.2\n\n200\t0.05\n");
    const auto table = parse_gene_param_table(in);
    REQUIRE(table.size() == 2);
    CHECK(table[1].base_mean == 200.0);
    Rng rng(1);
    for (const auto& p : load_gene_params(&table, 100, rng)) {
        CHECK((p.base_mean == 10.0 || p.base_mean == 200.0));
    }
    std::istringstream bad("10\t0.2\n-3\t0.1\nx\ty\n");
    try {
        parse_gene_param_table(bad);
        FAIL("expected an error");
    } catch (const InputError& e) {
        REQUIRE(e.diagnostics().size() == 2);
        CHECK(e.diagnostics()[0].row == 2);
        CHECK(e.diagnostics()[1].row == 3);
    }
    std::istringstream empty("base_mean\tdispersion\n");
    CHECK_THROWS_AS(parse_gene_param_table(empty), InputError);
}

TEST_CASE("datasets are reproducible") {
    const auto c = small_config();
    const auto a = generate_dataset(c, 2);
    const auto b = generate_dataset(c, 2);
    CHECK(a.counts.data() == b.counts.data());
    CHECK(a.truth.de_set == b.truth.de_set);
    CHECK(generate_dataset(c, 3).counts.data() != a.counts.data());
}

TEST_CASE("covariate setting") {
    auto c = small_config();
    c.covariate_setting = true;
    c.n = 20;
    std::size_t agree = 0, total = 0;
    for (std::size_t rep = 0; rep < 40; ++rep) {
        const auto ds = generate_dataset(c, rep);
        REQUIRE(ds.design.n_covariates() == 1);
        for (std::size_t i = 0; i < c.n; ++i) {
            const bool treated = ds.design.treatment[i] == 1;
            const bool z = ds.design.covariates(static_cast<Eigen::Index>(i), 0) == 1.0;
            agree += treated == z;
            ++total;
        }
        std::size_t with_gamma = 0;
        for (double g : ds.truth.true_gamma) {
            if (g != 0.0) {
                ++with_gamma;
                CHECK(g >= 2.0);
                CHECK(g <= 3.0);
            }
        }
        CHECK(with_gamma == 40);
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(total) == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("scoring") {
    TruthLabels truth;
    truth.de_set = {1, 3, 5};
    truth.null_set = {0, 2, 4};
    const auto none = score_discoveries({}, truth);
    CHECK(none.fdp == 0.0);
    CHECK(none.tpr == 0.0);
    const auto perfect = score_discoveries({1, 3, 5}, truth);
    CHECK(perfect.fdp == 0.0);
    CHECK(perfect.tpr == 1.0);
    const auto mixed = score_discoveries({0, 1, 2, 3}, truth);
    CHECK(mixed.fdp == 0.5);
    CHECK(mixed.tpr == doctest::Approx(2.0 / 3.0));
    CHECK(mixed.true_positives == 2);
}

TEST_CASE("grid bookkeeping with stub methods") {
    auto c = small_config();
    c.replicates = 4;
    auto d = c;
    d.n = 10;
    d.seed = 12;
    // The oracle method needs the truth, so regenerate it from the cell.
    std::vector<SimulationConfig> cells{c, d};
    auto perfect = [&](MethodContext& ctx, double) {
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            SimulationConfig cfg = cells[ci];
            cfg.seed = derive_seed(cfg.seed, {ci});
            for (std::size_t r = 0; r < cfg.replicates; ++r) {
                auto ds = generate_dataset(cfg, r);
                if (ds.counts.checksum() == ctx.counts().checksum()) return ds.truth.de_set;
            }
        }
        throw std::runtime_error("dataset not found");
    };
    std::vector<HarnessMethod> methods{
        stub("EMPTY", [](MethodContext&, double) { return std::vector<std::size_t>{}; }),
        stub("PERFECT", perfect),
        stub("BROKEN", [](MethodContext&, double) -> std::vector<std::size_t> { throw std::runtime_error("boom"); }),
    };
    const auto result = run_grid(cells, methods, 1);
    REQUIRE(result.rows.size() == 6);
    REQUIRE(result.records.size() == 8 * 3);
    CHECK(result.rows[0].method == "EMPTY");
    CHECK(result.rows[0].fdr == 0.0);
    CHECK(result.rows[0].power == 0.0);
    CHECK(result.rows[0].replicates == 4);
    CHECK(result.rows[1].fdr == 0.0);
    CHECK(result.rows[1].power == 1.0);
    CHECK(result.rows[1].power_se == 0.0);
    CHECK(result.rows[2].status == RecordStatus::Failed);
    CHECK(result.rows[2].failed == 4);
    CHECK(result.rows[4].config.n == 10);
    for (const auto& rec : result.records) {
        if (rec.method == "BROKEN") {
            CHECK(rec.status == RecordStatus::Failed);
            CHECK(rec.error == "boom");
        }
        CHECK(rec.checksum != 0);
    }
    std::ostringstream out;
    write_metrics_tsv(out, result.rows);
    CHECK(out.str().find("BROKEN\tFAILED\tFAILED\tFAILED\tFAILED\t0") != std::string::npos);
    CHECK(out.str().find("EMPTY\t0.000000\t0.000000\t0.000000\t0.000000\t4") != std::string::npos);
}

TEST_CASE("methods that cannot use covariates are skipped") {
    auto c = small_config();
    c.covariate_setting = true;
    c.replicates = 2;
    HarnessOptions opts;
    const auto methods = builtin_methods({Method::WilcoxonRaw, Method::NbglmBh}, opts);
    const auto result = run_grid({c}, methods);
    CHECK(result.rows[0].status == RecordStatus::Skipped);
    CHECK(result.rows[1].status == RecordStatus::Ok);
    opts.wilcoxon_covariate_blind = true;
    const auto blind = run_grid({c}, builtin_methods({Method::WilcoxonRaw}, opts));
    CHECK(blind.rows[0].status == RecordStatus::Ok);
}

TEST_CASE("grid output does not depend on the thread count") {
    auto c = small_config();
    c.replicates = 3;
    auto d = c;
    d.n = 6;
    const auto methods =
        builtin_methods({Method::Nullstrap, Method::NbglmBh, Method::WilcoxonRaw, Method::WilcoxonNorm}, {});
    std::ostringstream one, three;
    write_metrics_tsv(one, run_grid({c, d}, methods, 1).rows);
    write_metrics_tsv(three, run_grid({c, d}, methods, 3).rows);
    CHECK(one.str() == three.str());
}

TEST_CASE("power grows with sample size") {
    auto small = small_config();
    small.n = 6;
    small.replicates = 3;
    auto large = small;
    large.n = 20;
    const auto methods = builtin_methods({Method::NbglmBh}, {});
    const auto result = run_grid({small, large}, methods);
    CHECK(result.rows[1].power > result.rows[0].power);
}

TEST_CASE("configuration validation") {
    auto c = small_config();
    CHECK_NOTHROW(c.validate());
    c.n = 7;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small_config();
    c.fc = 1.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = small_config();
    c.q = 1.0;
    c.pi_de = 0.0;
    try {
        c.validate();
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(e.diagnostics().size() == 2);
    }
    c = small_config();
    c.pi_de = 0.0;
    CHECK(generate_dataset(c, 0).truth.de_set.empty());
}

TEST_CASE("setting presets") {
    const auto one = setting_preset(1);
    CHECK(one.n.size() == 10);
    CHECK(one.n.front() == 6);
    CHECK(one.n.back() == 24);
    CHECK(one.fc == std::vector<double>{2.0, 2.5, 3.0});
    CHECK(one.q.size() == 8);
    CHECK(one.q.back() == doctest::Approx(0.4));
    CHECK(expand_grid(one).size() == 10 * 3 * 3 * 8);
    const auto two = setting_preset(2);
    CHECK(two.fc == std::vector<double>{2.5, 3.0, 3.5});
    for (const auto& c : expand_grid(two)) CHECK(c.covariate_setting);
    CHECK_THROWS_AS(setting_preset(3), InputError);
}

TEST_CASE("label permutations") {
    const std::vector<int> labels{2, 2, 2, 2, 2, 1, 1, 1, 1, 1};
    std::set<std::vector<int>> seen;
    for (std::size_t r = 0; r < 30; ++r) {
        auto p = permuted_labels(labels, 5, r);
        CHECK(std::count(p.begin(), p.end(), 1) == 5);
        CHECK(p == permuted_labels(labels, 5, r));
        seen.insert(p);
    }
    CHECK(seen.size() > 20);
}

TEST_CASE("permutation null check") {
    auto c = small_config();
    c.pi_de = 0.0;
    const auto ds = generate_dataset(c, 0);
    std::vector<HarnessMethod> methods{
        stub("EMPTY", [](MethodContext&, double) { return std::vector<std::size_t>{}; }),
        stub("FIRST_TWO",
             [](MethodContext& ctx, double) {
                 // Depends on the permuted design only through its first label.
                 return ctx.design().treatment[0] == 1 ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{};
             }),
        stub("NO_COVARIATES", [](MethodContext&, double) { return std::vector<std::size_t>{}; }, false),
    };
    const auto out = permutation_null_check(ds.counts, ds.design, 40, 0.05, methods, 3);
    REQUIRE(out.size() == 3);
    CHECK(out[0].mean == 0.0);
    CHECK(out[0].histogram == std::map<std::size_t, std::size_t>{{0, 40}});
    CHECK(out[1].counts.size() == 40);
    CHECK(out[1].max == 2);
    CHECK(out[1].histogram.at(0) + out[1].histogram.at(2) == 40);
    CHECK(out[2].status == RecordStatus::Ok);

    const auto none = permutation_null_check(ds.counts, ds.design, 0, 0.05, methods, 3);
    CHECK(none[0].counts.empty());
    CHECK(none[0].histogram.empty());

    std::ostringstream tsv, hist;
    write_null_check_tsv(tsv, out);
    write_null_histogram_tsv(hist, out);
    CHECK(tsv.str().rfind("method\tmean_discoveries\tp50\tp95\tmax\nEMPTY\t0.000000\t0\t0\t0\n", 0) == 0);
    CHECK(hist.str().find("EMPTY\t0\t40\n") != std::string::npos);

    DesignInfo three = ds.design;
    three.n_conditions = 3;
    CHECK_THROWS_AS(permutation_null_check(ds.counts, three, 5, 0.05, methods, 3), InputError);
}
