#pragma once

// Minimal comma-separated table reader/writer used by every file format.

#include <iosfwd>
#include <string>
#include <vector>

namespace gridflex::csv {

struct Table {
    std::string source;  // file name used in error messages
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_of_row;  // 1-based source line

    /// Column index; throws ParseError naming the column when absent.
    int column(const std::string& name) const;
    int find_column(const std::string& name) const;  // -1 when absent

    const std::string& cell(std::size_t row, int col) const;
    double number(std::size_t row, int col) const;
    double number_or(std::size_t row, int col, double fallback) const;  // empty cell -> fallback
};

/// Lines starting with '#' and blank lines are skipped.
Table read(std::istream& in, const std::string& source);
Table read_file(const std::string& path);

/// 17 significant digits, so a value survives a text round trip exactly.
std::string format(double v);

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void row(const std::vector<std::string>& cells);

private:
    std::ostream& os_;
};

/// Writes to path.tmp and renames over path.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace gridflex::csv
