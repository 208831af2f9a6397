// csv.hpp: numeric tables with a header row.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctoqw {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row);
};

// Reals use 17 significant digits; +-inf is written as "inf" / "-inf" and NaN
// is rejected. Lines end with '\n'.
std::string format_csv(const Table& table);
void emit_csv(const Table& table, const std::filesystem::path& path);

Table parse_csv(const std::string& text);
Table read_csv(const std::filesystem::path& path);

std::string format_real(double x);

} // namespace ctoqw
