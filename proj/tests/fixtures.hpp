#pragma once
// Small builders shared by the unit tests.

#include "nullstrap/core_model.hpp"

#include <fmt/format.h>

#include <string>
#include <vector>

namespace fixture {

// rows[i][j]: sample i, gene j.
inline nullstrap::CountMatrix counts(const std::vector<std::vector<nullstrap::Count>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t m = rows.empty() ? 0 : rows[0].size();
    std::vector<std::string> samples, genes;
    for (std::size_t i = 0; i < n; ++i) samples.push_back(fmt::format("s{}", i + 1));
    for (std::size_t j = 0; j < m; ++j) genes.push_back(fmt::format("g{}", j + 1));
    std::vector<nullstrap::Count> data(n * m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) data[j * n + i] = rows[i][j];
    return {samples, genes, data};
}

// One gene per column vector: genes[j][i].
inline nullstrap::CountMatrix by_gene(const std::vector<std::vector<nullstrap::Count>>& genes) {
    std::vector<std::vector<nullstrap::Count>> rows(genes[0].size(), std::vector<nullstrap::Count>(genes.size()));
    for (std::size_t j = 0; j < genes.size(); ++j)
        for (std::size_t i = 0; i < genes[j].size(); ++i) rows[i][j] = genes[j][i];
    return counts(rows);
}

// First half level 2 (control), second half level 1 (treated).
inline nullstrap::DesignInfo two_group(std::size_t n) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 2 : 1;
    return nullstrap::DesignInfo::two_group(labels);
}

} // namespace fixture
