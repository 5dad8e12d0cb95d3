#pragma once

#include "nullstrap/baselines.hpp"
#include "nullstrap/core_model.hpp"
#include "nullstrap/pipeline.hpp"
#include "nullstrap/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nullstrap {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct GeneParams {
    double base_mean = 0.0;   // exp(alpha_j)
    double dispersion = 0.0;  // phi_j
};

/**
 * One simulation cell. Samples are split evenly into control (reference)
 * and treated groups. With `covariate_setting`, a binary z_i is drawn with
 * P(z = 1 | treated) = imbalance and P(z = 1 | control) = 1 - imbalance, and
 * a random `covariate_gene_frac` of genes get gamma_j ~ Uniform(gamma_range).
 */
struct SimulationConfig {
    int setting = 1;
    std::size_t n = 16;
    std::size_t m = 1000;
    double pi_de = 0.1;
    double fc = 3.0;
    double q = 0.1;
    std::size_t replicates = 50;
    bool covariate_setting = false;
    double covariate_gene_frac = 0.2;
    double imbalance = 0.8;
    Interval gamma_range{2.0, 3.0};
    Interval sf_range{0.9, 1.1};
    std::uint64_t seed = 1;
    bool all_up = false;
    // Empirical (base mean, dispersion) pairs; BUILTIN distribution when null.
    std::shared_ptr<const std::vector<GeneParams>> param_table;
    std::string param_source = "BUILTIN";

    // n even and >= 4, 0 < pi_de < 1, fc > 1, 0 < q < 1.
    void validate() const;
};

// Two-column TSV (base_mean, dispersion); a non-numeric first line is a header.
std::vector<GeneParams> parse_gene_param_table(std::istream& in);
std::vector<GeneParams> read_gene_param_table(const std::filesystem::path& path);

// BUILTIN: log base mean ~ Normal(log 50, 1) truncated to base mean >= 1,
// phi = 0.05 + (2 / mean) * LogNormal(0, 0.3^2). With a table, rows are
// resampled with replacement.
std::vector<GeneParams> load_gene_params(const std::vector<GeneParams>* table, std::size_t m, Rng& rng);

struct TruthLabels {
    std::vector<std::size_t> de_set;    // S1, ascending
    std::vector<std::size_t> null_set;  // S0, ascending
    std::vector<double> true_beta;
    std::vector<double> true_gamma;     // zero when the gene has no covariate effect
};

struct SimulatedDataset {
    CountMatrix counts;
    DesignInfo design;
    TruthLabels truth;
    std::vector<double> size_factors;
    std::vector<GeneParams> params;
    std::uint64_t seed = 0;
};

// Dataset for replicate `rep_index` of `config` (seeded from config.seed and
// rep_index). pi_de = 0 is accepted here for global-null datasets.
SimulatedDataset generate_dataset(const SimulationConfig& config, std::size_t rep_index);

// Inputs a method sees for one dataset. Real-data fits are computed on first
// use and shared between methods.
class MethodContext {
public:
    MethodContext(const CountMatrix& counts, const DesignInfo& design, std::uint64_t seed,
                  FitOptions fit_options);

    const CountMatrix& counts() const { return counts_; }
    const DesignInfo& design() const { return design_; }
    std::uint64_t seed() const { return seed_; }
    const RealFit& real_fit();

private:
    const CountMatrix& counts_;
    const DesignInfo& design_;
    std::uint64_t seed_;
    FitOptions fit_options_;
    std::optional<RealFit> real_fit_;
};

struct HarnessMethod {
    std::string label;
    // Wilcoxon-style methods that cannot use covariates.
    bool supports_covariates = true;
    std::function<std::vector<std::size_t>(MethodContext&, double q)> run;
};

struct HarnessOptions {
    bool adjust = true;
    std::optional<StatMode> mode;
    DispersionMethod dispersion = DispersionMethod::CoxReid;
    bool shrink_dispersion = true;
    // Run Wilcoxon methods on covariate designs by ignoring the covariates;
    // otherwise those cells report SKIPPED.
    bool wilcoxon_covariate_blind = false;
    unsigned threads = 1;
};

HarnessMethod builtin_method(Method method, const HarnessOptions& options);
// Real-data fit settings matching `options`.
FitOptions harness_fit_options(const HarnessOptions& options);
std::vector<HarnessMethod> builtin_methods(const std::vector<Method>& methods, const HarnessOptions& options);

enum class RecordStatus { Ok, Skipped, Failed };
std::string_view to_string(RecordStatus status);

struct ReplicateRecord {
    std::size_t cell = 0;
    std::size_t replicate = 0;
    std::string method;
    RecordStatus status = RecordStatus::Ok;
    double fdp = 0.0;
    double tpr = 0.0;
    std::size_t discoveries = 0;
    std::size_t true_positives = 0;
    std::uint64_t checksum = 0;  // dataset the method received
    std::string error;
};

// FDP = |D ∩ S0| / max(|D|, 1), TPR = |D ∩ S1| / |S1|.
ReplicateRecord score_discoveries(const std::vector<std::size_t>& discoveries, const TruthLabels& truth);

struct MetricsRow {
    SimulationConfig config;
    std::string method;
    RecordStatus status = RecordStatus::Ok;
    double fdr = 0.0;
    double fdr_se = 0.0;
    double power = 0.0;
    double power_se = 0.0;
    std::size_t replicates = 0;
    std::size_t failed = 0;
};

struct GridResult {
    std::vector<MetricsRow> rows;  // cell-major, methods in the given order
    std::vector<ReplicateRecord> records;
};

// Every cell x replicate is an independent task; dataset seeds are derived
// from (cell seed, cell index, replicate index).
GridResult run_grid(const std::vector<SimulationConfig>& cells, const std::vector<HarnessMethod>& methods,
                    unsigned threads = 1, const FitOptions& fit = {});

struct GridSpec {
    int setting = 1;
    std::vector<std::size_t> n;
    std::vector<double> fc;
    std::vector<double> pi_de;
    std::vector<double> q;
    SimulationConfig base;
};

// Parameter grids of the two simulation settings.
GridSpec setting_preset(int setting);
std::vector<SimulationConfig> expand_grid(const GridSpec& spec);

void write_metrics_tsv(std::ostream& out, const std::vector<MetricsRow>& rows);

struct NullCheckSummary {
    std::string method;
    RecordStatus status = RecordStatus::Ok;
    std::vector<std::size_t> counts;  // discoveries per permutation
    double mean = 0.0;
    std::size_t p50 = 0;
    std::size_t p95 = 0;
    std::size_t max = 0;
    std::map<std::size_t, std::size_t> histogram;
};

// Shuffles the condition labels (group sizes preserved) `permutations`
// times and records every method's discovery count at level q. Requires a
// two-condition design.
std::vector<NullCheckSummary> permutation_null_check(const CountMatrix& counts, const DesignInfo& design,
                                                     std::size_t permutations, double q,
                                                     const std::vector<HarnessMethod>& methods,
                                                     std::uint64_t seed, unsigned threads = 1,
                                                     const FitOptions& fit = {});

// Treatment labels used by permutation `index`.
std::vector<int> permuted_labels(const std::vector<int>& labels, std::uint64_t seed, std::size_t index);

void write_null_check_tsv(std::ostream& out, const std::vector<NullCheckSummary>& summaries);
void write_null_histogram_tsv(std::ostream& out, const std::vector<NullCheckSummary>& summaries);

} // namespace nullstrap
