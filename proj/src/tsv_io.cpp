#include "nullstrap/tsv_io.hpp"

#include "nullstrap/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

namespace nullstrap {

namespace {

std::optional<double> parse_real(const std::string& cell) {
    if (cell.empty()) {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) {
            return std::nullopt;
        }
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<long long> parse_integer(const std::string& cell) {
    long long v = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) {
        return v;
    }
    return std::nullopt;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError(ErrorCode::Parse, fmt::format("cannot open '{}'", path.string()));
    }
    return in;
}

} // namespace

std::vector<std::string> split_tsv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') {
        view.remove_suffix(1);
    }
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = view.find('\t', start);
        if (tab == std::string_view::npos) {
            cells.emplace_back(view.substr(start));
            break;
        }
        cells.emplace_back(view.substr(start, tab - start));
        start = tab + 1;
    }
    return cells;
}

CountMatrix parse_counts_tsv(std::istream& in) {
    std::vector<Diagnostic> problems;
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line != "\r") {
            auto header = split_tsv_line(line);
            samples.assign(header.begin() + 1, header.end());
            break;
        }
    }
    if (samples.empty()) {
        throw InputError(ErrorCode::Empty, "count table has no header row with sample ids");
    }

    std::vector<std::string> genes;
    std::vector<Count> data;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto cells = split_tsv_line(line);
        if (cells.size() != samples.size() + 1) {
            problems.push_back({ErrorCode::DimensionMismatch, line_no, 0,
                                fmt::format("expected {} fields, found {}", samples.size() + 1, cells.size())});
            continue;
        }
        genes.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            std::optional<Count> value = parse_integer(cells[c]);
            auto real = value ? std::nullopt : parse_real(cells[c]);
            if (!value && real && std::isfinite(*real) && std::floor(*real) == *real) {
                value = static_cast<Count>(*real);
            }
            if (value) {
                // Reported here so the position refers to the file.
                if (*value < 0) {
                    problems.push_back({ErrorCode::NegativeCount, line_no, c + 1,
                                        fmt::format("gene '{}' has count {}", cells[0], *value)});
                }
                data.push_back(*value);
                continue;
            }
            problems.push_back({real ? ErrorCode::NonIntegerCount : ErrorCode::Parse, line_no, c + 1,
                                fmt::format("'{}' is not an integer count", cells[c])});
            data.push_back(0);
        }
    }
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
    if (genes.empty()) {
        throw InputError(ErrorCode::Empty, "count table has no gene rows");
    }

    // File is gene-major already: one line per gene.
    return CountMatrix(std::move(samples), std::move(genes), std::move(data));
}

CountMatrix read_counts_tsv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_counts_tsv(in);
}

void write_counts_tsv(std::ostream& out, const CountMatrix& counts) {
    out << "gene_id";
    for (const auto& s : counts.sample_ids()) {
        out << '\t' << s;
    }
    out << '\n';
    for (std::size_t j = 0; j < counts.n_genes(); ++j) {
        out << counts.gene_ids()[j];
        for (Count c : counts.gene(j)) {
            out << '\t' << c;
        }
        out << '\n';
    }
}

void write_counts_tsv(const std::filesystem::path& path, const CountMatrix& counts) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("cannot write '{}'", path.string()));
    }
    write_counts_tsv(out, counts);
}

DesignInfo parse_metadata_tsv(std::istream& in, const std::vector<std::string>& sample_order,
                              const MetadataOptions& options) {
    std::vector<Diagnostic> problems;
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line != "\r") {
            header = split_tsv_line(line);
            break;
        }
    }
    if (header.size() < 2 || header[0] != "sample_id" || header[1] != "condition") {
        throw InputError({{ErrorCode::Parse, line_no, 0,
                           "metadata header must start with 'sample_id<TAB>condition'"}});
    }
    const std::size_t p = header.size() - 2;

    struct Row {
        std::size_t line;
        std::vector<std::string> cells;
    };
    std::unordered_map<std::string, Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto cells = split_tsv_line(line);
        if (cells.size() != header.size()) {
            problems.push_back({ErrorCode::DimensionMismatch, line_no, 0,
                                fmt::format("expected {} fields, found {}", header.size(), cells.size())});
            continue;
        }
        const std::string id = cells[0];
        if (!rows.emplace(id, Row{line_no, std::move(cells)}).second) {
            problems.push_back({ErrorCode::DuplicateId, line_no, 1,
                                fmt::format("sample '{}' listed twice", id)});
        }
    }

    std::vector<const Row*> ordered;
    for (const auto& s : sample_order) {
        auto it = rows.find(s);
        if (it == rows.end()) {
            problems.push_back({ErrorCode::DimensionMismatch, 0, 0,
                                fmt::format("sample '{}' from the count table has no metadata row", s)});
        } else {
            ordered.push_back(&it->second);
        }
    }
    if (rows.size() > sample_order.size()) {
        problems.push_back({ErrorCode::DimensionMismatch, 0, 0,
                            fmt::format("metadata lists {} samples, count table has {}", rows.size(),
                                        sample_order.size())});
    }
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }

    DesignInfo design;
    const auto n = static_cast<Eigen::Index>(ordered.size());

    // Condition labels: integers forming exactly 1..K are level numbers;
    // any other labels are sorted, with the reference moved to the last level.
    bool level_numbers = true;
    std::set<long long> numbers;
    for (const Row* r : ordered) {
        const auto v = parse_integer(r->cells[1]);
        level_numbers = level_numbers && v.has_value();
        if (v) numbers.insert(*v);
    }
    level_numbers = level_numbers && !numbers.empty() && *numbers.begin() == 1 &&
                    *numbers.rbegin() == static_cast<long long>(numbers.size());
    if (level_numbers && !options.reference) {
        int k = 0;
        for (const Row* r : ordered) {
            const int level = static_cast<int>(*parse_integer(r->cells[1]));
            design.treatment.push_back(level);
            k = std::max(k, level);
        }
        design.n_conditions = k;
        for (int level = 1; level <= k; ++level) {
            design.condition_names.push_back(std::to_string(level));
        }
    } else {
        std::set<std::string> levels;
        for (const Row* r : ordered) {
            levels.insert(r->cells[1]);
        }
        const std::string reference = options.reference.value_or(levels.empty() ? "" : *levels.begin());
        if (!levels.contains(reference)) {
            throw InputError(ErrorCode::UnknownCondition,
                             fmt::format("reference level '{}' does not occur in the metadata", reference));
        }
        std::map<std::string, int> index;
        for (const auto& level : levels) {
            if (level != reference) {
                const int next = static_cast<int>(index.size()) + 1;
                index[level] = next;
                design.condition_names.push_back(level);
            }
        }
        index[reference] = static_cast<int>(levels.size());
        design.condition_names.push_back(reference);
        design.n_conditions = static_cast<int>(levels.size());
        for (const Row* r : ordered) {
            design.treatment.push_back(index.at(r->cells[1]));
        }
    }

    design.covariates = Eigen::MatrixXd(n, static_cast<Eigen::Index>(p));
    for (std::size_t c = 0; c < p; ++c) {
        const std::size_t col = c + 2;
        design.covariate_names.push_back(header[col]);
        bool numeric = true;
        std::set<std::string> distinct;
        for (const Row* r : ordered) {
            numeric = numeric && parse_real(r->cells[col]).has_value();
            distinct.insert(r->cells[col]);
        }
        if (!numeric && distinct.size() != 2) {
            problems.push_back({ErrorCode::Parse, 0, col + 1,
                                fmt::format("covariate '{}' is neither numeric nor two-level", header[col])});
            continue;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& cell = ordered[static_cast<std::size_t>(i)]->cells[col];
            design.covariates(i, static_cast<Eigen::Index>(c)) =
                numeric ? *parse_real(cell) : (cell == *distinct.begin() ? 0.0 : 1.0);
        }
    }
    if (!problems.empty()) {
        throw InputError(std::move(problems));
    }
    return design;
}

DesignInfo read_metadata_tsv(const std::filesystem::path& path, const std::vector<std::string>& sample_order,
                             const MetadataOptions& options) {
    auto in = open_input(path);
    return parse_metadata_tsv(in, sample_order, options);
}

} // namespace nullstrap
