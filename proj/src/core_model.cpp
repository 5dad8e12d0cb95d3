#include "nullstrap/core_model.hpp"

#include "nullstrap/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace nullstrap {

namespace {

void require_unique(const std::vector<std::string>& ids, std::string_view what,
                    std::vector<Diagnostic>& out) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!seen.insert(ids[i]).second) {
            out.push_back({ErrorCode::DuplicateId, 0, 0,
                           fmt::format("duplicate {} id '{}' (position {})", what, ids[i], i + 1)});
        }
    }
}

double median_of(std::vector<double>& v) {
    const std::size_t half = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half), v.end());
    const double upper = v[half];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half));
    return 0.5 * (lower + upper);
}

} // namespace

CountMatrix::CountMatrix(std::vector<std::string> sample_ids, std::vector<std::string> gene_ids,
                         std::vector<Count> gene_major)
    : sample_ids_(std::move(sample_ids)), gene_ids_(std::move(gene_ids)), data_(std::move(gene_major)) {
    std::vector<Diagnostic> problems;
    if (data_.size() != sample_ids_.size() * gene_ids_.size()) {
        problems.push_back({ErrorCode::DimensionMismatch, 0, 0,
                            fmt::format("{} counts for {} samples x {} genes", data_.size(),
                                        sample_ids_.size(), gene_ids_.size())});
    }
    require_unique(sample_ids_, "sample", problems);
    require_unique(gene_ids_, "gene", problems);
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
}

std::uint64_t CountMatrix::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(n_samples());
    mix(n_genes());
    for (Count c : data_) {
        mix(static_cast<std::uint64_t>(c));
    }
    return h;
}

Eigen::MatrixXd DesignInfo::treatment_matrix() const {
    const auto n = static_cast<Eigen::Index>(treatment.size());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n_conditions - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int level = treatment[static_cast<std::size_t>(i)];
        if (level >= 1 && level < n_conditions) {
            x(i, level - 1) = 1.0;
        }
    }
    return x;
}

Eigen::MatrixXd DesignInfo::model_matrix(bool with_treatment) const {
    const auto n = static_cast<Eigen::Index>(treatment.size());
    const Eigen::Index k = with_treatment ? n_conditions - 1 : 0;
    const Eigen::Index p = covariates.cols();
    Eigen::MatrixXd m(n, 1 + k + p);
    m.col(0).setOnes();
    if (k > 0) {
        m.middleCols(1, k) = treatment_matrix();
    }
    if (p > 0) {
        m.rightCols(p) = covariates;
    }
    return m;
}

DesignInfo DesignInfo::two_group(const std::vector<int>& labels) {
    DesignInfo d;
    d.treatment = labels;
    d.n_conditions = 2;
    d.covariates = Eigen::MatrixXd(static_cast<Eigen::Index>(labels.size()), 0);
    return d;
}

SizeFactors::SizeFactors(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("size factor {} is {}, expected a positive finite value", i + 1,
                                    values_[i]));
        }
    }
}

ValidatedDataset validate_inputs(CountMatrix counts, DesignInfo design) {
    std::vector<Diagnostic> problems;
    const std::size_t n = counts.n_samples();
    const std::size_t m = counts.n_genes();

    if (design.treatment.size() != n) {
        problems.push_back({ErrorCode::DimensionMismatch, 0, 0,
                            fmt::format("counts have {} samples but the design has {}", n,
                                        design.treatment.size())});
    }
    if (design.covariates.size() > 0 && static_cast<std::size_t>(design.covariates.rows()) != n) {
        problems.push_back({ErrorCode::DimensionMismatch, 0, 0,
                            fmt::format("covariate matrix has {} rows, expected {}",
                                        design.covariates.rows(), n)});
    }
    if (design.covariates.size() == 0) {
        design.covariates = Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0);
    }
    if (design.n_conditions < 2) {
        problems.push_back({ErrorCode::UnknownCondition, 0, 0,
                            fmt::format("need at least two conditions, got {}", design.n_conditions)});
    }

    // Rows/columns here use the on-disk orientation: gene rows, sample columns.
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = counts.gene(j);
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] < 0) {
                problems.push_back({ErrorCode::NegativeCount, j + 1, i + 1,
                                    fmt::format("gene '{}' sample '{}' has count {}", counts.gene_ids()[j],
                                                counts.sample_ids()[i], y[i])});
            }
        }
    }

    if (design.n_conditions >= 2) {
        std::vector<std::size_t> per_level(static_cast<std::size_t>(design.n_conditions), 0);
        for (std::size_t i = 0; i < design.treatment.size(); ++i) {
            const int level = design.treatment[i];
            if (level < 1 || level > design.n_conditions) {
                problems.push_back({ErrorCode::UnknownCondition, i + 1, 0,
                                    fmt::format("sample {} has condition {} outside 1..{}", i + 1, level,
                                                design.n_conditions)});
            } else {
                ++per_level[static_cast<std::size_t>(level - 1)];
            }
        }
        for (std::size_t k = 0; k < per_level.size(); ++k) {
            if (per_level[k] < 2) {
                const std::string name = k < design.condition_names.size() ? design.condition_names[k]
                                                                             : std::to_string(k + 1);
                problems.push_back({ErrorCode::TooFewSamples, 0, 0,
                                    fmt::format("condition '{}' has {} sample(s), need at least 2", name,
                                                per_level[k])});
            }
        }
    }

    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }

    ValidatedDataset out;
    out.flags.resize(m, GeneFlag::Analyzable);
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = counts.gene(j);
        const bool all_zero = std::all_of(y.begin(), y.end(), [](Count c) { return c == 0; });
        if (all_zero) {
            out.flags[j] = GeneFlag::AllZero;
            out.flagged.push_back(j);
        } else {
            out.analyzable.push_back(j);
        }
    }
    out.counts = std::move(counts);
    out.design = std::move(design);
    return out;
}

SizeFactors estimate_size_factors(const CountMatrix& counts) {
    const std::size_t n = counts.n_samples();
    const std::size_t m = counts.n_genes();

    std::vector<std::size_t> reference;
    std::vector<double> log_geo_mean;
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = counts.gene(j);
        if (n == 0 || !std::all_of(y.begin(), y.end(), [](Count c) { return c > 0; })) {
            continue;
        }
        double acc = 0.0;
        for (Count c : y) {
            acc += std::log(static_cast<double>(c));
        }
        reference.push_back(j);
        log_geo_mean.push_back(acc / static_cast<double>(n));
    }
    if (reference.empty()) {
        throw Error(ErrorCode::NoReferenceGene,
                    "no gene has positive counts in every sample; median-of-ratios is undefined");
    }

    std::vector<double> out(n);
    std::vector<double> ratios(reference.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < reference.size(); ++r) {
            const double y = static_cast<double>(counts.at(i, reference[r]));
            ratios[r] = y / std::exp(log_geo_mean[r]);
        }
        out[i] = median_of(ratios);
    }
    return SizeFactors(std::move(out));
}

Eigen::MatrixXd normalize_counts(const CountMatrix& counts, const SizeFactors& s) {
    const std::size_t n = counts.n_samples();
    const std::size_t m = counts.n_genes();
    if (s.size() != n) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{} size factors for {} samples", s.size(), n));
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const auto y = counts.gene(j);
        for (std::size_t i = 0; i < n; ++i) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<double>(y[i]) / s[i];
        }
    }
    return out;
}

} // namespace nullstrap
