#pragma once

#include "nullstrap/core_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nullstrap {

// Counts on disk: genes as rows, samples as columns. The first header cell
// is ignored; the first column of every other line is the gene id.
CountMatrix parse_counts_tsv(std::istream& in);
CountMatrix read_counts_tsv(const std::filesystem::path& path);

void write_counts_tsv(std::ostream& out, const CountMatrix& counts);
void write_counts_tsv(const std::filesystem::path& path, const CountMatrix& counts);

struct MetadataOptions {
    // Condition level used as the reference (level K). Defaults to the
    // lexicographically first label for string conditions.
    std::optional<std::string> reference;
};

// Metadata: columns `sample_id`, `condition`, then covariates (numeric, or
// two-level strings encoded 0/1). Rows are reordered to match `sample_order`.
// Conditions written as 1..K are taken as level numbers (K is the reference).
DesignInfo parse_metadata_tsv(std::istream& in, const std::vector<std::string>& sample_order,
                              const MetadataOptions& options = {});
DesignInfo read_metadata_tsv(const std::filesystem::path& path,
                             const std::vector<std::string>& sample_order,
                             const MetadataOptions& options = {});

// Splits one line on tabs, dropping a trailing '\r'.
std::vector<std::string> split_tsv_line(const std::string& line);

} // namespace nullstrap
