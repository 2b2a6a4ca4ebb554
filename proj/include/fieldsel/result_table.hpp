// Rectangular experiment results with typed columns, CSV emission and parsing.
//
// Reals are written with 17 significant digits so a table survives a
// write/parse round trip bit for bit; infinities are written as inf / -inf
// and NaN as nan.
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace fieldsel {

enum class ColumnType { Integer, Real, Text };

struct Column {
    std::string name;
    ColumnType type = ColumnType::Real;
    bool operator==(const Column&) const = default;
};

using Cell = std::variant<std::int64_t, double, std::string>;

struct ResultTable {
    std::string name;
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;

    ResultTable() = default;
    ResultTable(std::string table_name, std::vector<Column> schema);

    // Throws ValidationError on arity or type mismatch.
    void add_row(std::vector<Cell> row);
    std::size_t column_index(const std::string& column) const;
    double real(std::size_t row, const std::string& column) const;
    std::int64_t integer(std::size_t row, const std::string& column) const;
};

// NaN cells compare equal to NaN cells.
bool operator==(const ResultTable& lhs, const ResultTable& rhs);

std::string format_cell(const Cell& cell);
void write_csv(std::ostream& out, const ResultTable& table);
// Header must match the schema exactly.
ResultTable read_csv(std::istream& in, const std::string& name, const std::vector<Column>& schema,
                     const std::string& source = "<csv>");

// Run provenance written next to each CSV.
struct RunMetadata {
    std::string experiment;
    int schema_version = 1;
    std::string config_hash;
    std::string config_text;
    std::uint64_t seed = 0;
    std::string model_source;
    std::string model_hash;
    std::string code_version;
    std::string created_utc;
};

std::string code_version();
std::string utc_timestamp();

struct EmitResult {
    std::string csv_path;
    std::string metadata_path;
    std::vector<std::string> warnings;
};

// Writes <dir>/<table.name>.csv and <dir>/<table.name>.meta.json, creating
// the directory if needed. I/O failures raise IoError naming the path.
EmitResult emit_outputs(const ResultTable& table, const std::string& dir, const RunMetadata& meta);

// Writes a standalone matplotlib script <dir>/plot_<experiment>.py that reads
// the experiment's CSV files from its own directory. Returns the script path.
std::string write_plot_script(const std::string& experiment, const std::string& dir);

} // namespace fieldsel
