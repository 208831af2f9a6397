// csv.cpp

#include "ctoqw/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctoqw {

namespace {

std::string quote(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one record; handles quoted fields with doubled quotes.
std::vector<std::string> split_record(const std::string& text, std::size_t& pos)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    while (pos < text.size()) {
        const char c = text[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    cur += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
            break;
        } else {
            cur += c;
        }
    }
    if (quoted) throw std::runtime_error("csv: unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

double parse_real(const std::string& field, std::size_t line)
{
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || std::isnan(x)) {
        throw std::runtime_error("csv: line " + std::to_string(line) + ": not a number: '" + field + "'");
    }
    return x;
}

} // namespace

void Table::add_row(std::vector<double> row)
{
    if (row.size() != header.size()) {
        throw std::invalid_argument("Table: row has " + std::to_string(row.size()) +
                                    " columns, header has " + std::to_string(header.size()));
    }
    rows.push_back(std::move(row));
}

std::string format_real(double x)
{
    if (std::isnan(x)) throw std::invalid_argument("csv: NaN is not representable");
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0"; // folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_csv(const Table& table)
{
    std::string out;
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        if (k) out += ',';
        out += quote(table.header[k]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw std::invalid_argument("csv: ragged table");
        }
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_real(row[k]);
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const Table& table, const std::filesystem::path& path)
{
    const std::string text = format_csv(table);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("csv: cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.close();
    if (!f) throw std::runtime_error("csv: write failed for " + path.string());
}

Table parse_csv(const std::string& text)
{
    if (text.empty()) throw std::runtime_error("csv: missing header");
    Table t;
    std::size_t pos = 0;
    t.header = split_record(text, pos);
    std::size_t line = 1;
    while (pos < text.size()) {
        ++line;
        const auto fields = split_record(text, pos);
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != t.header.size()) {
            throw std::runtime_error("csv: line " + std::to_string(line) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(t.header.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_real(f, line));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table read_csv(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("csv: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

} // namespace ctoqw
