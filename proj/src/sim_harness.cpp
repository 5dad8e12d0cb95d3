#include "nullstrap/sim_harness.hpp"

#include "nullstrap/errors.hpp"
#include "nullstrap/parallel.hpp"
#include "nullstrap/synthetic_null.hpp"
#include "nullstrap/tsv_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

namespace nullstrap {

void SimulationConfig::validate() const {
    std::vector<Diagnostic> problems;
    auto bad = [&](std::string message) {
        problems.push_back({ErrorCode::InvalidArgument, 0, 0, std::move(message)});
    };
    if (n < 4 || n % 2 != 0) bad(fmt::format("n must be even and at least 4, got {}", n));
    if (m < 2) bad(fmt::format("m must be at least 2, got {}", m));
    if (!(pi_de > 0.0 && pi_de < 1.0)) bad(fmt::format("pi_de must lie in (0, 1), got {}", pi_de));
    if (!(fc > 1.0)) bad(fmt::format("fold change must exceed 1, got {}", fc));
    if (!(q > 0.0 && q < 1.0)) bad(fmt::format("q must lie in (0, 1), got {}", q));
    if (replicates == 0) bad("replicates must be positive");
    if (!(covariate_gene_frac >= 0.0 && covariate_gene_frac <= 1.0)) bad("covariate_gene_frac must lie in [0, 1]");
    if (!(imbalance >= 0.0 && imbalance <= 1.0)) bad("imbalance must lie in [0, 1]");
    if (!(sf_range.lo > 0.0 && sf_range.hi >= sf_range.lo)) bad("size factor range must be positive and ordered");
    if (!(gamma_range.hi >= gamma_range.lo)) bad("gamma range must be ordered");
    if (param_table && param_table->empty()) bad("parameter table is empty");
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
}

std::vector<GeneParams> parse_gene_param_table(std::istream& in) {
    std::vector<GeneParams> rows;
    std::vector<Diagnostic> problems;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split_tsv_line(line);
        double mean = 0.0;
        double disp = 0.0;
        bool ok = cells.size() >= 2;
        if (ok) {
            try {
                mean = std::stod(cells[0]);
                disp = std::stod(cells[1]);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok && first) {
            first = false;
            continue;  // header
        }
        first = false;
        if (!ok || !(mean > 0.0) || !(disp > 0.0) || !std::isfinite(mean) || !std::isfinite(disp)) {
            problems.push_back({ErrorCode::Parse, line_no, 0,
                                "expected positive base_mean and dispersion in the first two columns"});
            continue;
        }
        rows.push_back({mean, disp});
    }
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
    if (rows.empty()) {
        throw InputError(ErrorCode::Empty, "parameter table has no rows");
    }
    return rows;
}

std::vector<GeneParams> read_gene_param_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError(ErrorCode::Parse, fmt::format("cannot open '{}'", path.string()));
    }
    return parse_gene_param_table(in);
}

std::vector<GeneParams> load_gene_params(const std::vector<GeneParams>* table, std::size_t m, Rng& rng) {
    std::vector<GeneParams> out(m);
    if (table) {
        std::uniform_int_distribution<std::size_t> pick(0, table->size() - 1);
        for (auto& p : out) {
            p = (*table)[pick(rng)];
        }
        return out;
    }
    std::normal_distribution<double> log_mean(std::log(50.0), 1.0);
    std::lognormal_distribution<double> noise(0.0, 0.3);
    for (auto& p : out) {
        double mean = 0.0;
        do {
            mean = std::exp(log_mean(rng));
        } while (mean < 1.0);
        p.base_mean = mean;
        p.dispersion = 0.05 + (2.0 / mean) * noise(rng);
    }
    return out;
}

namespace {

// k distinct indices from [0, m), ascending.
std::vector<std::size_t> choose_subset(std::size_t m, std::size_t k, Rng& rng) {
    std::vector<std::size_t> all(m);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace

SimulatedDataset generate_dataset(const SimulationConfig& config, std::size_t rep_index) {
    if (config.n < 4 || config.n % 2 != 0 || !(config.pi_de >= 0.0 && config.pi_de < 1.0)) {
        throw InputError(ErrorCode::InvalidArgument, "simulation needs an even n >= 4 and pi_de in [0, 1)");
    }
    const std::size_t n = config.n;
    const std::size_t m = config.m;
    const std::size_t half = n / 2;

    SimulatedDataset ds;
    ds.seed = derive_seed(config.seed, {rep_index});

    // Control (reference, level 2) first, then treated (level 1).
    std::vector<std::string> samples;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const bool treated = i >= half;
        labels.push_back(treated ? 1 : 2);
        samples.push_back(fmt::format("{}_{}", treated ? "trt" : "ctrl", (treated ? i - half : i) + 1));
    }
    ds.design = DesignInfo::two_group(labels);
    ds.design.condition_names = {"treated", "control"};

    Rng design_rng = make_stream(ds.seed, {stream::design});
    std::uniform_real_distribution<double> sf(config.sf_range.lo, config.sf_range.hi);
    ds.size_factors.resize(n);
    for (auto& v : ds.size_factors) {
        v = sf(design_rng);
    }
    std::vector<double> z(n, 0.0);
    if (config.covariate_setting) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = labels[i] == 1 ? config.imbalance : 1.0 - config.imbalance;
            z[i] = std::bernoulli_distribution(p)(design_rng) ? 1.0 : 0.0;
        }
        ds.design.covariates = Eigen::Map<const Eigen::MatrixXd>(z.data(), static_cast<Eigen::Index>(n), 1);
        ds.design.covariate_names = {"z"};
    }

    Rng gene_rng = make_stream(ds.seed, {stream::genes});
    ds.params = load_gene_params(config.param_table.get(), m, gene_rng);

    const auto n_de = static_cast<std::size_t>(std::llround(config.pi_de * static_cast<double>(m)));
    ds.truth.de_set = choose_subset(m, n_de, gene_rng);
    ds.truth.true_beta.assign(m, 0.0);
    for (std::size_t j : ds.truth.de_set) {
        const bool up = config.all_up || std::bernoulli_distribution(0.5)(gene_rng);
        ds.truth.true_beta[j] = (up ? 1.0 : -1.0) * std::log(config.fc);
    }
    {
        std::vector<bool> is_de(m, false);
        for (std::size_t j : ds.truth.de_set) is_de[j] = true;
        for (std::size_t j = 0; j < m; ++j) {
            if (!is_de[j]) ds.truth.null_set.push_back(j);
        }
    }
    ds.truth.true_gamma.assign(m, 0.0);
    if (config.covariate_setting) {
        const auto n_cov = static_cast<std::size_t>(std::llround(config.covariate_gene_frac * static_cast<double>(m)));
        std::uniform_real_distribution<double> gamma(config.gamma_range.lo, config.gamma_range.hi);
        for (std::size_t j : choose_subset(m, n_cov, gene_rng)) {
            ds.truth.true_gamma[j] = gamma(gene_rng);
        }
    }

    std::vector<Count> data(n * m);
    for (std::size_t j = 0; j < m; ++j) {
        Rng rng = make_stream(ds.seed, {stream::counts, j});
        const double alpha = std::log(ds.params[j].base_mean);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = labels[i] == 1 ? 1.0 : 0.0;
            const double mu = std::exp(std::log(ds.size_factors[i]) + alpha + x * ds.truth.true_beta[j] +
                                       z[i] * ds.truth.true_gamma[j]);
            data[j * n + i] = sample_nb(mu, ds.params[j].dispersion, rng);
        }
    }
    std::vector<std::string> genes(m);
    for (std::size_t j = 0; j < m; ++j) {
        genes[j] = fmt::format("gene{:05d}", j + 1);
    }
    ds.counts = CountMatrix(std::move(samples), std::move(genes), std::move(data));
    return ds;
}

MethodContext::MethodContext(const CountMatrix& counts, const DesignInfo& design, std::uint64_t seed,
                             FitOptions fit_options)
    : counts_(counts), design_(design), seed_(seed), fit_options_(fit_options) {}

const RealFit& MethodContext::real_fit() {
    if (!real_fit_) {
        NullstrapOptions options;
        options.threads = fit_options_.threads;
        options.dispersion = fit_options_.dispersion;
        options.shrink_dispersion = fit_options_.shrink_dispersion;
        options.irls = fit_options_.irls;
        real_fit_ = fit_real_data(counts_, design_, options);
    }
    return *real_fit_;
}

HarnessMethod builtin_method(Method method, const HarnessOptions& options) {
    HarnessMethod out;
    out.label = std::string(to_string(method));
    switch (method) {
    case Method::Nullstrap:
        out.run = [options](MethodContext& ctx, double q) {
            NullstrapOptions ns;
            ns.q = q;
            ns.adjust = options.adjust;
            ns.mode = options.mode;
            ns.seed = ctx.seed();
            ns.threads = options.threads;
            ns.dispersion = options.dispersion;
            ns.shrink_dispersion = options.shrink_dispersion;
            return run_nullstrap_from_fits(ctx.counts(), ctx.design(), ctx.real_fit(), ns).result.discoveries;
        };
        break;
    case Method::NbglmBh:
        out.run = [](MethodContext& ctx, double q) { return nbglm_bh_from_fits(ctx.real_fit().fits, q).discoveries; };
        break;
    case Method::WilcoxonRaw:
    case Method::WilcoxonNorm:
        out.supports_covariates = options.wilcoxon_covariate_blind;
        out.run = [method, options](MethodContext& ctx, double q) {
            BaselineOptions base;
            base.threads = options.threads;
            base.ignore_covariates = options.wilcoxon_covariate_blind;
            return run_baseline(method, ctx.counts(), ctx.design(), ctx.real_fit().size_factors, q, base)
                .discoveries;
        };
        break;
    }
    return out;
}

FitOptions harness_fit_options(const HarnessOptions& options) {
    FitOptions fit;
    fit.threads = options.threads;
    fit.dispersion = options.dispersion;
    fit.shrink_dispersion = options.shrink_dispersion;
    return fit;
}

std::vector<HarnessMethod> builtin_methods(const std::vector<Method>& methods, const HarnessOptions& options) {
    std::vector<HarnessMethod> out;
    for (Method m : methods) {
        out.push_back(builtin_method(m, options));
    }
    return out;
}

std::string_view to_string(RecordStatus status) {
    switch (status) {
    case RecordStatus::Ok: return "OK";
    case RecordStatus::Skipped: return "SKIPPED";
    case RecordStatus::Failed: return "FAILED";
    }
    return "UNKNOWN";
}

ReplicateRecord score_discoveries(const std::vector<std::size_t>& discoveries, const TruthLabels& truth) {
    ReplicateRecord r;
    r.discoveries = discoveries.size();
    for (std::size_t j : discoveries) {
        if (std::binary_search(truth.de_set.begin(), truth.de_set.end(), j)) {
            ++r.true_positives;
        }
    }
    const std::size_t false_positives = r.discoveries - r.true_positives;
    r.fdp = static_cast<double>(false_positives) / static_cast<double>(std::max<std::size_t>(r.discoveries, 1));
    r.tpr = truth.de_set.empty() ? 0.0
                                 : static_cast<double>(r.true_positives) / static_cast<double>(truth.de_set.size());
    return r;
}

namespace {

bool skip_for_design(const HarnessMethod& method, const DesignInfo& design) {
    return !method.supports_covariates && design.n_covariates() > 0;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& values) {
    MeanSe out;
    if (values.empty()) {
        return out;
    }
    const double count = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - out.mean) * (v - out.mean);
        }
        out.se = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    }
    return out;
}

} // namespace

GridResult run_grid(const std::vector<SimulationConfig>& cells, const std::vector<HarnessMethod>& methods,
                    unsigned threads, const FitOptions& fit) {
    for (const auto& cell : cells) {
        cell.validate();
    }
    struct Task {
        std::size_t cell;
        std::size_t rep;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (std::size_t r = 0; r < cells[c].replicates; ++r) {
            tasks.push_back({c, r});
        }
    }

    const std::size_t k = methods.size();
    std::vector<ReplicateRecord> records(tasks.size() * k);
    parallel_for(tasks.size(), threads, [&](std::size_t t) {
        const Task task = tasks[t];
        SimulationConfig config = cells[task.cell];
        config.seed = derive_seed(config.seed, {task.cell});

        auto fill = [&](std::size_t mi, ReplicateRecord record) {
            record.cell = task.cell;
            record.replicate = task.rep;
            record.method = methods[mi].label;
            records[t * k + mi] = std::move(record);
        };

        std::optional<SimulatedDataset> data;
        try {
            data = generate_dataset(config, task.rep);
        } catch (const std::exception& e) {
            for (std::size_t mi = 0; mi < k; ++mi) {
                ReplicateRecord failed;
                failed.status = RecordStatus::Failed;
                failed.error = e.what();
                fill(mi, std::move(failed));
            }
            return;
        }

        const std::uint64_t checksum = data->counts.checksum();
        MethodContext ctx(data->counts, data->design, derive_seed(data->seed, {stream::nullstrap}), fit);
        for (std::size_t mi = 0; mi < k; ++mi) {
            ReplicateRecord record;
            if (skip_for_design(methods[mi], data->design)) {
                record.status = RecordStatus::Skipped;
            } else {
                try {
                    record = score_discoveries(methods[mi].run(ctx, config.q), data->truth);
                } catch (const std::exception& e) {
                    record = ReplicateRecord{};
                    record.status = RecordStatus::Failed;
                    record.error = e.what();
                }
            }
            record.checksum = data->counts.checksum();
            if (record.checksum != checksum) {
                throw Error(ErrorCode::Internal, "a method modified the shared simulated dataset");
            }
            fill(mi, std::move(record));
        }
    });

    GridResult result;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (std::size_t mi = 0; mi < k; ++mi) {
            std::vector<double> fdp;
            std::vector<double> tpr;
            std::size_t failed = 0;
            std::size_t skipped = 0;
            for (std::size_t t = 0; t < tasks.size(); ++t) {
                if (tasks[t].cell != c) continue;
                const auto& rec = records[t * k + mi];
                switch (rec.status) {
                case RecordStatus::Ok:
                    fdp.push_back(rec.fdp);
                    tpr.push_back(rec.tpr);
                    break;
                case RecordStatus::Skipped: ++skipped; break;
                case RecordStatus::Failed: ++failed; break;
                }
            }
            MetricsRow row;
            row.config = cells[c];
            row.method = methods[mi].label;
            row.failed = failed;
            row.replicates = fdp.size();
            if (fdp.empty()) {
                row.status = skipped > 0 ? RecordStatus::Skipped : RecordStatus::Failed;
            } else {
                const auto f = mean_and_se(fdp);
                const auto p = mean_and_se(tpr);
                row.fdr = f.mean;
                row.fdr_se = f.se;
                row.power = p.mean;
                row.power_se = p.se;
            }
            result.rows.push_back(std::move(row));
        }
    }
    result.records = std::move(records);
    return result;
}

GridSpec setting_preset(int setting) {
    if (setting != 1 && setting != 2) {
        throw InputError(ErrorCode::InvalidArgument, fmt::format("unknown simulation setting {}", setting));
    }
    GridSpec spec;
    spec.setting = setting;
    for (std::size_t n = 6; n <= 24; n += 2) {
        spec.n.push_back(n);
    }
    spec.fc = setting == 1 ? std::vector<double>{2.0, 2.5, 3.0} : std::vector<double>{2.5, 3.0, 3.5};
    spec.pi_de = {0.1, 0.15, 0.2};
    for (int i = 1; i <= 8; ++i) {
        spec.q.push_back(0.05 * i);
    }
    spec.base.setting = setting;
    spec.base.covariate_setting = setting == 2;
    return spec;
}

std::vector<SimulationConfig> expand_grid(const GridSpec& spec) {
    std::vector<SimulationConfig> cells;
    for (double pi : spec.pi_de) {
        for (double fc : spec.fc) {
            for (std::size_t n : spec.n) {
                for (double q : spec.q) {
                    SimulationConfig c = spec.base;
                    c.setting = spec.setting;
                    c.n = n;
                    c.fc = fc;
                    c.pi_de = pi;
                    c.q = q;
                    cells.push_back(c);
                }
            }
        }
    }
    return cells;
}

void write_metrics_tsv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "setting\tn\tm\tpi_de\tfc\tq\tcovariates\tmethod\tfdr\tfdr_se\tpower\tpower_se\treplicates\n";
    for (const auto& r : rows) {
        out << fmt::format("{}\t{}\t{}\t{:g}\t{:g}\t{:g}\t{}\t{}\t", r.config.setting, r.config.n, r.config.m,
                           r.config.pi_de, r.config.fc, r.config.q, r.config.covariate_setting ? 1 : 0, r.method);
        if (r.status == RecordStatus::Ok) {
            out << fmt::format("{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\n", r.fdr, r.fdr_se, r.power, r.power_se,
                               r.replicates);
        } else {
            const auto tag = to_string(r.status);
            out << fmt::format("{0}\t{0}\t{0}\t{0}\t{1}\n", tag, r.replicates);
        }
    }
}

std::vector<int> permuted_labels(const std::vector<int>& labels, std::uint64_t seed, std::size_t index) {
    std::vector<int> out = labels;
    Rng rng = make_stream(seed, {stream::permutation, index});
    // Fisher-Yates with explicit draws, independent of std::shuffle's algorithm.
    for (std::size_t i = out.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(out[i - 1], out[pick(rng)]);
    }
    return out;
}

std::vector<NullCheckSummary> permutation_null_check(const CountMatrix& counts, const DesignInfo& design,
                                                     std::size_t permutations, double q,
                                                     const std::vector<HarnessMethod>& methods,
                                                     std::uint64_t seed, unsigned threads,
                                                     const FitOptions& fit) {
    if (design.n_conditions != 2) {
        throw InputError(ErrorCode::InvalidArgument,
                         fmt::format("permutation check needs two conditions, design has {}", design.n_conditions));
    }
    const std::size_t k = methods.size();
    std::vector<std::optional<std::size_t>> found(permutations * k);
    std::vector<bool> skipped(k, false);
    for (std::size_t mi = 0; mi < k; ++mi) {
        skipped[mi] = skip_for_design(methods[mi], design);
    }

    parallel_for(permutations, threads, [&](std::size_t r) {
        DesignInfo permuted = design;
        permuted.treatment = permuted_labels(design.treatment, seed, r);
        MethodContext ctx(counts, permuted, derive_seed(seed, {stream::nullstrap, r}), fit);
        for (std::size_t mi = 0; mi < k; ++mi) {
            if (skipped[mi]) continue;
            found[r * k + mi] = methods[mi].run(ctx, q).size();
        }
    });

    std::vector<NullCheckSummary> out;
    for (std::size_t mi = 0; mi < k; ++mi) {
        NullCheckSummary s;
        s.method = methods[mi].label;
        if (skipped[mi]) {
            s.status = RecordStatus::Skipped;
            out.push_back(std::move(s));
            continue;
        }
        for (std::size_t r = 0; r < permutations; ++r) {
            s.counts.push_back(*found[r * k + mi]);
        }
        if (!s.counts.empty()) {
            std::vector<std::size_t> sorted = s.counts;
            std::sort(sorted.begin(), sorted.end());
            auto nearest_rank = [&](double p) {
                const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
                return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
            };
            s.mean = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), std::size_t{0})) /
                     static_cast<double>(sorted.size());
            s.p50 = nearest_rank(0.5);
            s.p95 = nearest_rank(0.95);
            s.max = sorted.back();
            for (std::size_t c : sorted) {
                ++s.histogram[c];
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_null_check_tsv(std::ostream& out, const std::vector<NullCheckSummary>& summaries) {
    out << "method\tmean_discoveries\tp50\tp95\tmax\n";
    for (const auto& s : summaries) {
        if (s.status != RecordStatus::Ok) {
            out << fmt::format("{0}\t{1}\t{1}\t{1}\t{1}\n", s.method, to_string(s.status));
            continue;
        }
        out << fmt::format("{}\t{:.6f}\t{}\t{}\t{}\n", s.method, s.mean, s.p50, s.p95, s.max);
    }
}

void write_null_histogram_tsv(std::ostream& out, const std::vector<NullCheckSummary>& summaries) {
    out << "method\tdiscoveries\tpermutations\n";
    for (const auto& s : summaries) {
        for (const auto& [count, freq] : s.histogram) {
            out << fmt::format("{}\t{}\t{}\n", s.method, count, freq);
        }
    }
}

} // namespace nullstrap
