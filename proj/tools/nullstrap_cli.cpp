// nullstrap: differential expression with synthetic-null FDR control.
//
//   nullstrap analyze counts.tsv metadata.tsv [--q 0.05] [--out dir]
//   nullstrap simulate [--setting 1|2] [--n 8,16] [--reps 50] [--out dir]
//   nullstrap null-check counts.tsv metadata.tsv [--permutations 100]
//
// Exit codes: 0 success, 2 input error, 3 pipeline failure.

#include "nullstrap/baselines.hpp"
#include "nullstrap/errors.hpp"
#include "nullstrap/parallel.hpp"
#include "nullstrap/pipeline.hpp"
#include "nullstrap/sim_harness.hpp"
#include "nullstrap/tsv_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nullstrap;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitPipeline = 3;

struct SharedFlags {
    double q = 0.05;
    std::uint64_t seed = 1;
    int threads = -1;  // -1: NULLSTRAP_THREADS or auto
    bool no_adjust = false;
    std::string stat;
    std::string methods;
    std::string out = ".";
    std::string dump_null;
    std::string dump_fdp;
    std::string params;
    std::string reference;
    std::string dispersion = "cox_reid";
    bool no_shrink = false;
    bool per_gene_sf = false;
    std::string config;
};

struct AnalyzeFlags {
    std::string counts;
    std::string metadata;
};

struct SimulateFlags {
    int setting = 0;
    std::vector<std::size_t> n;
    std::vector<double> fc;
    std::vector<double> pi;
    std::vector<double> q;
    std::size_t m = 1000;
    std::size_t reps = 50;
    bool all_up = false;
    bool wilcoxon_blind = false;
};

struct NullCheckFlags {
    std::string counts;
    std::string metadata;
    std::size_t permutations = 100;
};

void add_shared(CLI::App& sub, SharedFlags& f, bool with_q) {
    if (with_q) {
        sub.add_option("--q", f.q, "Target FDR level")->check(CLI::Range(0.0, 1.0));
    }
    sub.add_option("--seed", f.seed, "Master random seed");
    sub.add_option("--threads", f.threads, "Worker threads (0 = all cores; default $NULLSTRAP_THREADS)")
        ->check(CLI::NonNegativeNumber);
    sub.add_flag("--no-adjust", f.no_adjust, "Use q as given instead of the small-sample adjusted level");
    sub.add_option("--stat", f.stat, "Test statistic")
        ->check(CLI::IsMember({"scaled_wald", "neg_log_p", "wald_quad"}));
    sub.add_option("--methods", f.methods, "Comma-separated methods: nullstrap,nbglm_bh,wilcoxon_raw,wilcoxon_norm");
    sub.add_option("--out", f.out, "Output directory");
    sub.add_option("--dispersion", f.dispersion, "Dispersion estimator")->check(CLI::IsMember({"cox_reid", "mle"}));
    sub.add_flag("--no-shrink", f.no_shrink, "Keep per-gene dispersions instead of shrinking toward the mean trend");
    sub.add_option("--config", f.config, "key = value file of flag defaults; command-line flags take precedence");
}

unsigned resolve_thread_flag(int flag) {
    if (flag >= 0) {
        return static_cast<unsigned>(flag);
    }
    if (const char* env = std::getenv("NULLSTRAP_THREADS")) {
        try {
            return static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            throw InputError(ErrorCode::InvalidArgument, fmt::format("NULLSTRAP_THREADS='{}' is not a number", env));
        }
    }
    return 0;
}

std::optional<StatMode> stat_flag(const std::string& text) {
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_stat_mode(text);
}

std::vector<Method> method_list(const std::string& csv, std::vector<Method> fallback) {
    if (csv.empty()) {
        return fallback;
    }
    std::vector<Method> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto m = parse_method(item);
        if (!m) {
            throw InputError(ErrorCode::InvalidArgument, fmt::format("unknown method '{}'", item));
        }
        if (std::find(out.begin(), out.end(), *m) == out.end()) {
            out.push_back(*m);
        }
    }
    if (out.empty()) {
        throw InputError(ErrorCode::InvalidArgument, "--methods is empty");
    }
    return out;
}

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return fmt::format("fnv1a64:{:016x}", h);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw InputError(ErrorCode::InvalidArgument, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Internal, fmt::format("cannot write '{}'", path.string()));
    }
    return out;
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

json shared_json(const SharedFlags& f, unsigned threads, const std::vector<Method>& methods) {
    json j;
    j["q"] = f.q;
    j["seed"] = f.seed;
    j["threads"] = threads;
    j["adjust"] = !f.no_adjust;
    j["stat"] = f.stat.empty() ? "default" : f.stat;
    json ms = json::array();
    for (Method m : methods) ms.push_back(std::string(method_flag(m)));
    j["methods"] = ms;
    j["dispersion"] = f.dispersion;
    j["shrink_dispersion"] = !f.no_shrink;
    return j;
}

std::string fmt_num(double v) {
    if (!std::isfinite(v)) {
        return std::isnan(v) ? "NA" : (v > 0 ? "Inf" : "-Inf");
    }
    return fmt::format("{:.10g}", v);
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_num(*v) : "";
}

// Coefficients joined with commas for K > 2.
std::string fmt_vec(const Eigen::VectorXd& v, double scale) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt_num(v[i] * scale);
    }
    return s;
}

DesignInfo load_design(const std::string& metadata, const CountMatrix& counts, const SharedFlags& f) {
    MetadataOptions mo;
    if (!f.reference.empty()) mo.reference = f.reference;
    return read_metadata_tsv(metadata, counts.sample_ids(), mo);
}

int cmd_analyze(const AnalyzeFlags& a, const SharedFlags& f) {
    const unsigned threads = resolve_thread_flag(f.threads);
    const auto methods = method_list(f.methods, {Method::Nullstrap});
    CountMatrix counts = read_counts_tsv(a.counts);
    DesignInfo design = load_design(a.metadata, counts, f);
    const ValidatedDataset data = validate_inputs(std::move(counts), std::move(design));

    NullstrapOptions opts;
    opts.q = f.q;
    opts.adjust = !f.no_adjust;
    opts.mode = stat_flag(f.stat);
    opts.seed = f.seed;
    opts.threads = threads;
    opts.dispersion = *parse_dispersion_method(f.dispersion);
    opts.shrink_dispersion = !f.no_shrink;
    opts.per_gene_size_factors = f.per_gene_sf;
    const NullstrapRun run = run_nullstrap(data, opts);

    std::vector<MethodResult> extra;
    for (Method m : methods) {
        if (m == Method::Nullstrap) continue;
        if (m == Method::NbglmBh) {
            extra.push_back(nbglm_bh_from_fits(run.fits, f.q));
        } else {
            BaselineOptions bo;
            bo.threads = threads;
            bo.fit.dispersion = opts.dispersion;
            bo.fit.shrink_dispersion = opts.shrink_dispersion;
            extra.push_back(run_baseline(m, data.counts, data.design, run.size_factors, f.q, bo));
        }
    }

    const fs::path out_dir(f.out);
    ensure_dir(out_dir);
    const std::size_t n = data.counts.n_samples();
    const std::size_t m = data.counts.n_genes();
    const auto p_values = compute_p_values(run.fits);
    std::vector<bool> discovered(m, false);
    for (std::size_t j : run.result.discoveries) discovered[j] = true;
    const double ln2 = std::log(2.0);

    {
        auto out = open_out(out_dir / "report.tsv");
        out << "gene_id\tbaseMean\tlog2FoldChange\tse\tstat_observed\tp_value\tnullstrap_discovery\tstatus\tbeta\tstat_null";
        for (const auto& r : extra) {
            out << '\t' << method_flag(r.method) << "_pvalue\t" << method_flag(r.method) << "_discovery";
        }
        out << '\n';
        for (std::size_t j = 0; j < m; ++j) {
            const auto y = data.counts.gene(j);
            double base_mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) base_mean += static_cast<double>(y[i]) / run.size_factors[i];
            base_mean /= static_cast<double>(n);
            const GeneFit& fit = run.fits[j];
            const bool has_stats = run.stats.observed[j].has_value();
            out << data.counts.gene_ids()[j] << '\t' << fmt_num(base_mean) << '\t'
                << (has_stats ? fmt_vec(fit.beta, 1.0 / ln2) : "") << '\t'
                << (has_stats ? fmt_vec(fit.se_beta, 1.0 / ln2) : "") << '\t' << fmt_opt(run.stats.observed[j])
                << '\t' << fmt_opt(p_values[j]) << '\t' << (discovered[j] ? 1 : 0) << '\t' << to_string(fit.status)
                << '\t' << (has_stats ? fmt_vec(fit.beta, 1.0) : "") << '\t' << fmt_opt(run.stats.null[j]);
            for (const auto& r : extra) {
                const bool hit = std::binary_search(r.discoveries.begin(), r.discoveries.end(), j);
                out << '\t' << fmt_opt(r.p_values[j]) << '\t' << (hit ? 1 : 0);
            }
            out << '\n';
        }
    }
    if (!f.dump_null.empty()) {
        write_counts_tsv(fs::path(f.dump_null), run.null_counts);
    }
    if (!f.dump_fdp.empty()) {
        auto out = open_out(f.dump_fdp);
        out << "threshold\tfdp\n";
        for (std::size_t k = 0; k < run.result.curve.thresholds.size(); ++k) {
            out << fmt_num(run.result.curve.thresholds[k]) << '\t' << fmt_num(run.result.curve.fdp[k]) << '\n';
        }
    }

    json j;
    j["command"] = "analyze";
    j["config"] = shared_json(f, threads, methods);
    j["config"]["reference"] = f.reference.empty() ? json(nullptr) : json(f.reference);
    j["config"]["per_gene_size_factors"] = f.per_gene_sf;
    j["inputs"] = {{"counts", {{"path", a.counts}, {"checksum", file_checksum(a.counts)}}},
                   {"metadata", {{"path", a.metadata}, {"checksum", file_checksum(a.metadata)}}}};
    j["result"] = {{"samples", n},
                   {"genes", m},
                   {"tested", run.result.n_tested},
                   {"stat", std::string(to_string(run.stats.mode))},
                   {"effective_q", run.result.effective_q},
                   {"tau", std::isfinite(run.result.tau) ? json(run.result.tau) : json("Inf")},
                   {"discoveries", run.result.discoveries.size()}};
    write_json(out_dir / "run.json", j);
    std::cerr << fmt::format("{} of {} genes tested, {} discoveries at q = {} (effective {:.6g})\n",
                             run.result.n_tested, m, run.result.discoveries.size(), f.q, run.result.effective_q);
    return 0;
}

int cmd_simulate(const SimulateFlags& s, const SharedFlags& f, bool q_given) {
    const unsigned threads = resolve_thread_flag(f.threads);
    const auto methods =
        method_list(f.methods, {Method::Nullstrap, Method::NbglmBh, Method::WilcoxonRaw, Method::WilcoxonNorm});

    GridSpec spec;
    if (s.setting != 0) {
        spec = setting_preset(s.setting);
    } else {
        // Without a preset: the single default cell of setting 1.
        SimulationConfig d;
        spec.setting = 1;
        spec.n = {d.n};
        spec.fc = {d.fc};
        spec.pi_de = {d.pi_de};
        spec.q = {d.q};
    }
    if (!s.n.empty()) spec.n = s.n;
    if (!s.fc.empty()) spec.fc = s.fc;
    if (!s.pi.empty()) spec.pi_de = s.pi;
    if (!s.q.empty()) spec.q = s.q;
    else if (q_given) spec.q = {f.q};
    spec.base.m = s.m;
    spec.base.replicates = s.reps;
    spec.base.seed = f.seed;
    spec.base.all_up = s.all_up;
    if (!f.params.empty()) {
        spec.base.param_table = std::make_shared<const std::vector<GeneParams>>(read_gene_param_table(f.params));
        spec.base.param_source = f.params;
    }
    const auto cells = expand_grid(spec);
    for (const auto& c : cells) c.validate();

    HarnessOptions ho;
    ho.adjust = !f.no_adjust;
    ho.mode = stat_flag(f.stat);
    ho.dispersion = *parse_dispersion_method(f.dispersion);
    ho.shrink_dispersion = !f.no_shrink;
    ho.wilcoxon_covariate_blind = s.wilcoxon_blind;
    ho.threads = 1;  // parallelism is across replicates
    const GridResult result = run_grid(cells, builtin_methods(methods, ho), threads,
                                       harness_fit_options(ho));

    const fs::path out_dir(f.out);
    ensure_dir(out_dir);
    {
        auto out = open_out(out_dir / "metrics.tsv");
        write_metrics_tsv(out, result.rows);
    }
    std::size_t failed = 0;
    for (const auto& r : result.records) {
        if (r.status == RecordStatus::Failed) {
            ++failed;
            std::cerr << fmt::format("cell {} replicate {} {}: {}\n", r.cell, r.replicate, r.method, r.error);
        }
    }

    json j;
    j["command"] = "simulate";
    j["config"] = shared_json(f, threads, methods);
    j["grid"] = {{"setting", spec.setting},
                 {"n", spec.n},
                 {"fc", spec.fc},
                 {"pi_de", spec.pi_de},
                 {"q", spec.q},
                 {"m", s.m},
                 {"replicates", s.reps},
                 {"covariates", spec.base.covariate_setting},
                 {"imbalance", spec.base.imbalance},
                 {"covariate_gene_frac", spec.base.covariate_gene_frac},
                 {"gamma_range", {spec.base.gamma_range.lo, spec.base.gamma_range.hi}},
                 {"sf_range", {spec.base.sf_range.lo, spec.base.sf_range.hi}},
                 {"all_up", s.all_up},
                 {"wilcoxon_covariate_blind", s.wilcoxon_blind}};
    j["inputs"] = {{"params", spec.base.param_source}};
    if (!f.params.empty()) j["inputs"]["params_checksum"] = file_checksum(f.params);
    j["result"] = {{"cells", cells.size()}, {"failed_records", failed}};
    write_json(out_dir / "run.json", j);
    std::cerr << fmt::format("{} cells x {} replicates written to {}\n", cells.size(), s.reps,
                             (out_dir / "metrics.tsv").string());
    return 0;
}

int cmd_null_check(const NullCheckFlags& c, const SharedFlags& f) {
    const unsigned threads = resolve_thread_flag(f.threads);
    const auto methods =
        method_list(f.methods, {Method::Nullstrap, Method::NbglmBh, Method::WilcoxonRaw, Method::WilcoxonNorm});
    CountMatrix counts = read_counts_tsv(c.counts);
    DesignInfo design = load_design(c.metadata, counts, f);
    const ValidatedDataset data = validate_inputs(std::move(counts), std::move(design));
    if (data.design.n_conditions != 2) {
        throw InputError(ErrorCode::InvalidArgument,
                         fmt::format("null-check needs two conditions, metadata has {}", data.design.n_conditions));
    }

    HarnessOptions ho;
    ho.adjust = !f.no_adjust;
    ho.mode = stat_flag(f.stat);
    ho.dispersion = *parse_dispersion_method(f.dispersion);
    ho.shrink_dispersion = !f.no_shrink;
    ho.threads = 1;
    const auto summaries = permutation_null_check(data.counts, data.design, c.permutations, f.q,
                                                  builtin_methods(methods, ho), f.seed, threads,
                                                  harness_fit_options(ho));

    const fs::path out_dir(f.out);
    ensure_dir(out_dir);
    {
        auto out = open_out(out_dir / "null_check.tsv");
        write_null_check_tsv(out, summaries);
    }
    {
        auto out = open_out(out_dir / "null_histogram.tsv");
        write_null_histogram_tsv(out, summaries);
    }
    json j;
    j["command"] = "null-check";
    j["config"] = shared_json(f, threads, methods);
    j["config"]["permutations"] = c.permutations;
    j["config"]["reference"] = f.reference.empty() ? json(nullptr) : json(f.reference);
    j["inputs"] = {{"counts", {{"path", c.counts}, {"checksum", file_checksum(c.counts)}}},
                   {"metadata", {{"path", c.metadata}, {"checksum", file_checksum(c.metadata)}}}};
    write_json(out_dir / "run.json", j);
    return 0;
}

void print_input_error(const InputError& e) {
    if (e.diagnostics().empty()) {
        std::cerr << "error: " << e.what() << '\n';
        return;
    }
    for (const auto& d : e.diagnostics()) {
        std::cerr << "error: " << d.format() << '\n';
    }
}

// Reads `--config FILE` (key = value lines, '#' comments, [sections]
// ignored) and splices the settings in after the subcommand name. Keys that
// also appear on the command line are dropped so the command line wins.
// Flags take true / false.
std::vector<std::string> expand_config(int argc, char** argv, CLI::App& app) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        }
    }
    if (!path || args.empty()) {
        return args;
    }
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args[0]);
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    auto given = [&](const std::string& flag) {
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    std::ifstream in(*path);
    if (!in) {
        throw InputError(ErrorCode::Parse, fmt::format("cannot open config file '{}'", *path));
    }
    auto trim = [](const std::string& v) {
        const auto b = v.find_first_not_of(" \t\r");
        const auto e = v.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    std::vector<std::string> injected;
    std::vector<Diagnostic> problems;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back({ErrorCode::Parse, line_no, 0, "expected key = value"});
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.rfind("--", 0) == 0) key = key.substr(2);
        std::replace(key.begin(), key.end(), '_', '-');
        const std::string flag = "--" + key;
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (key == "config" || opt == nullptr) {
            problems.push_back({ErrorCode::Parse, line_no, 0, fmt::format("unknown setting '{}'", key)});
            continue;
        }
        if (given(flag)) continue;
        if (opt->get_expected_min() == 0) {
            if (value != "true" && value != "false") {
                problems.push_back({ErrorCode::Parse, line_no, 0, fmt::format("'{}' takes true or false", key)});
            } else if (value == "true") {
                injected.push_back(flag);
            }
            continue;
        }
        injected.push_back(flag);
        injected.push_back(value);
    }
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differential expression with synthetic-null FDR control"};
    app.require_subcommand(1);

    SharedFlags shared;
    AnalyzeFlags analyze;
    SimulateFlags simulate;
    NullCheckFlags null_check;

    auto* an = app.add_subcommand("analyze", "Test every gene of a count matrix");
    an->add_option("counts", analyze.counts, "Count matrix TSV (genes x samples)")->required()->check(CLI::ExistingFile);
    an->add_option("metadata", analyze.metadata, "Sample metadata TSV")->required()->check(CLI::ExistingFile);
    add_shared(*an, shared, true);
    an->add_option("--dump-null", shared.dump_null, "Write the synthetic null count matrix here");
    an->add_option("--dump-fdp", shared.dump_fdp, "Write the estimated FDP curve here");
    an->add_option("--reference", shared.reference, "Reference condition label");
    an->add_flag("--per-gene-sf-resample", shared.per_gene_sf)->group("");

    auto* sim = app.add_subcommand("simulate", "Run the simulation grid and write metrics.tsv");
    add_shared(*sim, shared, true);
    sim->add_option("--setting", simulate.setting, "Preset grid (1: no covariates, 2: confounding covariate)")
        ->check(CLI::IsMember({1, 2}));
    sim->add_option("--n", simulate.n, "Sample sizes")->delimiter(',');
    sim->add_option("--fc", simulate.fc, "Fold changes")->delimiter(',');
    sim->add_option("--pi", simulate.pi, "DE gene proportions")->delimiter(',');
    sim->add_option("--q-grid", simulate.q, "Target FDR levels (overrides --q)")->delimiter(',');
    sim->add_option("--m", simulate.m, "Genes per dataset")->check(CLI::PositiveNumber);
    sim->add_option("--reps", simulate.reps, "Replicates per cell")->check(CLI::PositiveNumber);
    sim->add_option("--params", shared.params, "Two-column TSV of (base_mean, dispersion) pairs")
        ->check(CLI::ExistingFile);
    sim->add_flag("--all-up", simulate.all_up, "Make every DE effect positive");
    sim->add_flag("--wilcoxon-blind", simulate.wilcoxon_blind, "Run Wilcoxon on covariate cells, ignoring covariates");

    auto* nc = app.add_subcommand("null-check", "Permute condition labels and count discoveries");
    nc->add_option("counts", null_check.counts, "Count matrix TSV")->required()->check(CLI::ExistingFile);
    nc->add_option("metadata", null_check.metadata, "Sample metadata TSV")->required()->check(CLI::ExistingFile);
    add_shared(*nc, shared, true);
    nc->add_option("--permutations", null_check.permutations, "Number of label permutations");
    nc->add_option("--reference", shared.reference, "Reference condition label");

    try {
        // CLI11 wants the arguments in reverse order.
        std::vector<std::string> args = expand_config(argc, argv, app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const InputError& e) {
        print_input_error(e);
        return kExitInput;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (an->parsed()) return cmd_analyze(analyze, shared);
        if (sim->parsed()) return cmd_simulate(simulate, shared, sim->count("--q") > 0);
        if (nc->parsed()) return cmd_null_check(null_check, shared);
    } catch (const InputError& e) {
        print_input_error(e);
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return kExitPipeline;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPipeline;
    }
    return kExitPipeline;
}
