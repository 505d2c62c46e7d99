#include "gridflex/csv.hpp"

#include "gridflex/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>

namespace gridflex::csv {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

} // namespace

int Table::find_column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    return -1;
}

int Table::column(const std::string& name) const
{
    const int c = find_column(name);
    if (c < 0)
        throw Error(ErrorCode::ParseError,
                    source + ":1: missing column '" + name + "'");
    return c;
}

const std::string& Table::cell(std::size_t row, int col) const
{
    return rows.at(row).at(static_cast<std::size_t>(col));
}

double Table::number(std::size_t row, int col) const
{
    const std::string& s = cell(row, col);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_of_row[row]) + ":" +
                                               std::to_string(col + 1) + ": column '" + header[col] +
                                               "' expects a number, got '" + s + "'");
    return v;
}

double Table::number_or(std::size_t row, int col, double fallback) const
{
    if (col < 0 || cell(row, col).empty())
        return fallback;
    return number(row, col);
}

Table read(std::istream& in, const std::string& source)
{
    Table t;
    t.source = source;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#')
            continue;
        std::vector<std::string> cells = split(s);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error(ErrorCode::ParseError, source + ":" + std::to_string(lineno) + ":1: expected " +
                                                   std::to_string(t.header.size()) + " fields, got " +
                                                   std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_of_row.push_back(lineno);
    }
    if (!have_header)
        throw Error(ErrorCode::ParseError, source + ":1:1: empty file, header row expected");
    return t;
}

Table read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path);
    return read(in, path);
}

std::string format(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void Writer::row(const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i)
        os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::IoError, "cannot write " + tmp);
        out << content;
        out.flush();
        if (!out)
            throw Error(ErrorCode::IoError, "write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error(ErrorCode::IoError, "cannot rename " + tmp + " to " + path);
}

} // namespace gridflex::csv
