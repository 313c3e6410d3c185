#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqbench/matrix.hpp"
#include "uqbench/rng.hpp"

namespace uqbench {

struct Dataset {
    Matrix X;
    std::vector<double> y;
    std::vector<std::string> feature_names;

    std::size_t size() const { return X.rows(); }

    void validate() const {
        if (y.size() != X.rows())
            throw std::invalid_argument("Dataset: target length " + std::to_string(y.size()) +
                                        " does not match row count " + std::to_string(X.rows()));
    }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("load_csv: non-numeric cell at data row " + std::to_string(row) +
                                 ", column " + std::to_string(col) + ": '" + cell + "'");
    return value;
}

}  // namespace detail

// Comma-separated file with one header row; every column numeric, last
// column is the target. Row order is preserved.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");
    auto header = detail::split_line(line);
    if (header.size() < 2)
        throw std::runtime_error("load_csv: need at least one feature column and a target");
    for (auto& h : header) {
        while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    }

    const std::size_t n_cols = header.size();
    std::vector<double> values;
    std::size_t n_rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_line(line);
        if (cells.size() != n_cols)
            throw std::runtime_error("load_csv: data row " + std::to_string(n_rows) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(n_cols));
        for (std::size_t c = 0; c < n_cols; ++c)
            values.push_back(detail::parse_cell(cells[c], n_rows, c));
        ++n_rows;
    }
    if (n_rows == 0) throw std::runtime_error("load_csv: '" + path + "' has no data rows");

    Dataset d;
    d.X = Matrix(n_rows, n_cols - 1);
    d.y.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c + 1 < n_cols; ++c) d.X(r, c) = values[r * n_cols + c];
        d.y[r] = values[r * n_cols + n_cols - 1];
    }
    d.feature_names.assign(header.begin(), header.end() - 1);
    return d;
}

struct SplitSpec {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_val = 0;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    Dataset val;
    std::vector<std::size_t> train_rows;  // indices into the source dataset
    std::vector<std::size_t> test_rows;
    std::vector<std::size_t> val_rows;
};

// Seeded permutation partition into train/test/val. Sizes must add up to
// the dataset size so every row lands in exactly one part.
inline SplitResult split_dataset(const Dataset& data, const SplitSpec& spec) {
    data.validate();
    if (spec.n_train + spec.n_test + spec.n_val != data.size())
        throw std::invalid_argument("split_dataset: sizes " + std::to_string(spec.n_train) + "+" +
                                    std::to_string(spec.n_test) + "+" + std::to_string(spec.n_val) +
                                    " do not sum to dataset size " + std::to_string(data.size()));
    if (spec.n_train == 0 || spec.n_test == 0)
        throw std::invalid_argument("split_dataset: train and test parts must be nonempty");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(spec.seed, /*stream_id=*/0xda7a5e7ull);
    rng.shuffle(order);

    SplitResult r;
    r.train_rows.assign(order.begin(), order.begin() + spec.n_train);
    r.test_rows.assign(order.begin() + spec.n_train, order.begin() + spec.n_train + spec.n_test);
    r.val_rows.assign(order.begin() + spec.n_train + spec.n_test, order.end());

    auto take = [&](const std::vector<std::size_t>& rows) {
        Dataset part;
        part.X = data.X.take_rows(rows);
        part.y.reserve(rows.size());
        for (auto i : rows) part.y.push_back(data.y[i]);
        part.feature_names = data.feature_names;
        return part;
    };
    r.train = take(r.train_rows);
    r.test = take(r.test_rows);
    r.val = take(r.val_rows);
    return r;
}

}  // namespace uqbench
