#pragma once

// Minimal CSV output. Numbers are written with 17 significant digits so a
// file re-read with strtod gives back the same doubles.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rydcav::csv {

class Writer {
public:
    Writer(const std::filesystem::path& path, std::initializer_list<std::string> columns);

    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    std::size_t columns() const { return n_cols_; }

private:
    std::ofstream out_;
    std::size_t n_cols_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Throws std::runtime_error on a missing file or malformed numbers.
Table read(const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace rydcav::csv
