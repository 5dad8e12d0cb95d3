#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nullstrap {

using Count = std::int64_t;

/**
 * Read counts for n samples and m genes.
 *
 * Storage is gene-major: the n counts of one gene are contiguous, which is the
 * access pattern of every per-gene fit. Identifiers must be unique and match
 * the grid dimensions; negative entries are representable so that
 * `validate_inputs` can report them with their position.
 */
class CountMatrix {
public:
    CountMatrix() = default;

    // `gene_major` holds n_genes blocks of n_samples counts.
    CountMatrix(std::vector<std::string> sample_ids, std::vector<std::string> gene_ids,
                std::vector<Count> gene_major);

    std::size_t n_samples() const noexcept { return sample_ids_.size(); }
    std::size_t n_genes() const noexcept { return gene_ids_.size(); }

    const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
    const std::vector<std::string>& gene_ids() const noexcept { return gene_ids_; }

    Count at(std::size_t sample, std::size_t gene) const { return data_[gene * n_samples() + sample]; }

    std::span<const Count> gene(std::size_t j) const {
        return {data_.data() + j * n_samples(), n_samples()};
    }

    const std::vector<Count>& data() const noexcept { return data_; }

    // FNV-1a over dimensions and counts; identical matrices hash identically.
    std::uint64_t checksum() const;

private:
    std::vector<std::string> sample_ids_;
    std::vector<std::string> gene_ids_;
    std::vector<Count> data_;
};

/**
 * Per-sample experimental design.
 *
 * `treatment` holds condition labels in {1..K}; level K is the reference and
 * gets no dummy column. `covariates` is n x p (p may be zero).
 */
struct DesignInfo {
    std::vector<int> treatment;
    Eigen::MatrixXd covariates;
    int n_conditions = 2;
    std::vector<std::string> condition_names;  // optional, index k-1 names level k
    std::vector<std::string> covariate_names;  // optional

    std::size_t n_samples() const noexcept { return treatment.size(); }
    std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(covariates.cols()); }

    // n x (K-1) 0/1 dummy encoding of the non-reference levels.
    Eigen::MatrixXd treatment_matrix() const;

    // [1 | X | Z], or [1 | Z] when the treatment block is dropped.
    Eigen::MatrixXd model_matrix(bool with_treatment = true) const;

    static DesignInfo two_group(const std::vector<int>& labels);
};

// Positive, finite per-sample scale factors.
class SizeFactors {
public:
    SizeFactors() = default;
    explicit SizeFactors(std::vector<double> values);

    static SizeFactors ones(std::size_t n) { return SizeFactors(std::vector<double>(n, 1.0)); }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

enum class GeneFlag { Analyzable, AllZero };

struct ValidatedDataset {
    CountMatrix counts;
    DesignInfo design;
    std::vector<GeneFlag> flags;       // one per gene
    std::vector<std::size_t> analyzable;
    std::vector<std::size_t> flagged;

    std::size_t n_samples() const noexcept { return counts.n_samples(); }
    std::size_t n_genes() const noexcept { return counts.n_genes(); }
};

// Checks counts against the design and flags all-zero genes. Every problem
// found is collected into one InputError.
ValidatedDataset validate_inputs(CountMatrix counts, DesignInfo design);

// Median-of-ratios scale factors; the reference set is the genes with
// strictly positive counts in every sample.
SizeFactors estimate_size_factors(const CountMatrix& counts);

// Samples x genes matrix of Y_ij / s_i.
Eigen::MatrixXd normalize_counts(const CountMatrix& counts, const SizeFactors& s);

} // namespace nullstrap
