#include "rydcav/csv.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace rydcav::csv {

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

Writer::Writer(const std::filesystem::path& path, std::initializer_list<std::string> columns)
    : out_(path), n_cols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    bool first = true;
    for (const auto& c : columns) {
        out_ << (first ? "" : ",") << c;
        first = false;
    }
    out_ << '\n';
}

void Writer::row(std::span<const double> values) {
    if (values.size() != n_cols_) throw std::invalid_argument("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ << ',';
        out_ << format_number(values[i]);
    }
    out_ << '\n';
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) return t;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) throw std::runtime_error("bad number '" + cell + "' in " + path.string());
            r.push_back(v);
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace rydcav::csv
