#include "fieldsel/result_table.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fieldsel/csv.hpp"
#include "fieldsel/errors.hpp"
#include "text_util.hpp"

#ifndef FIELDSEL_VERSION
#define FIELDSEL_VERSION "unknown"
#endif

namespace fieldsel {

namespace fs = std::filesystem;

ResultTable::ResultTable(std::string table_name, std::vector<Column> schema)
    : name(std::move(table_name)), columns(std::move(schema)) {}

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw ValidationError("row arity does not match table '" + name + "'");
    for (std::size_t c = 0; c < row.size(); ++c) {
        if (row[c].index() != static_cast<std::size_t>(columns[c].type)) {
            throw ValidationError("cell type mismatch in column '" + columns[c].name + "'");
        }
    }
    rows.push_back(std::move(row));
}

std::size_t ResultTable::column_index(const std::string& column) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].name == column) return c;
    }
    throw ValidationError("table '" + name + "' has no column '" + column + "'");
}

double ResultTable::real(std::size_t row, const std::string& column) const {
    return std::get<double>(rows.at(row).at(column_index(column)));
}

std::int64_t ResultTable::integer(std::size_t row, const std::string& column) const {
    return std::get<std::int64_t>(rows.at(row).at(column_index(column)));
}

namespace {

bool cell_equal(const Cell& a, const Cell& b) {
    if (a.index() != b.index()) return false;
    if (const auto* x = std::get_if<double>(&a)) {
        const double y = std::get<double>(b);
        return (std::isnan(*x) && std::isnan(y)) || *x == y;
    }
    return a == b;
}

} // namespace

bool operator==(const ResultTable& lhs, const ResultTable& rhs) {
    if (lhs.name != rhs.name || lhs.columns != rhs.columns || lhs.rows.size() != rhs.rows.size()) return false;
    for (std::size_t r = 0; r < lhs.rows.size(); ++r) {
        for (std::size_t c = 0; c < lhs.columns.size(); ++c) {
            if (!cell_equal(lhs.rows[r][c], rhs.rows[r][c])) return false;
        }
    }
    return true;
}

std::string format_cell(const Cell& cell) {
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
    if (const auto* s = std::get_if<std::string>(&cell)) return *s;
    const double v = std::get<double>(cell);
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(std::ostream& out, const ResultTable& table) {
    std::vector<std::string> fields;
    for (const auto& c : table.columns) fields.push_back(c.name);
    csv::write_row(out, fields);
    for (const auto& row : table.rows) {
        fields.clear();
        for (const auto& cell : row) fields.push_back(format_cell(cell));
        csv::write_row(out, fields);
    }
}

ResultTable read_csv(std::istream& in, const std::string& name, const std::vector<Column>& schema,
                     const std::string& source) {
    ResultTable table(name, schema);
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (!csv::read_row(in, fields, line, source)) throw ParseError(source, 1, "missing header");
    if (fields.size() != schema.size()) throw ParseError(source, line, "header has wrong number of columns");
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (fields[c] != schema[c].name) throw ParseError(source, line, "expected column '" + schema[c].name + "'");
    }
    while (csv::read_row(in, fields, line, source)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != schema.size()) throw ParseError(source, line, "row has wrong number of fields");
        std::vector<Cell> row;
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const std::string& f = fields[c];
            switch (schema[c].type) {
            case ColumnType::Integer: {
                auto v = detail::parse_int(f);
                if (!v) throw ParseError(source, line, "column '" + schema[c].name + "': expected an integer");
                row.emplace_back(static_cast<std::int64_t>(*v));
                break;
            }
            case ColumnType::Real: {
                auto v = detail::parse_double(f);
                if (!v) throw ParseError(source, line, "column '" + schema[c].name + "': expected a number");
                row.emplace_back(*v);
                break;
            }
            case ColumnType::Text: row.emplace_back(f); break;
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string code_version() { return FIELDSEL_VERSION; }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << body;
    out.close();
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace

EmitResult emit_outputs(const ResultTable& table, const std::string& dir, const RunMetadata& meta) {
    ensure_dir(dir);
    EmitResult result;
    result.csv_path = (fs::path(dir) / (table.name + ".csv")).string();
    result.metadata_path = (fs::path(dir) / (table.name + ".meta.json")).string();
    if (table.rows.empty()) result.warnings.push_back("table '" + table.name + "' is empty; wrote header only");

    std::ostringstream body;
    write_csv(body, table);
    write_file(result.csv_path, body.str());

    nlohmann::json columns = nlohmann::json::array();
    for (const auto& c : table.columns) {
        const char* type = c.type == ColumnType::Integer ? "integer" : c.type == ColumnType::Real ? "real" : "text";
        columns.push_back({{"name", c.name}, {"type", type}});
    }
    const nlohmann::json doc = {
        {"table", table.name},
        {"experiment", meta.experiment},
        {"schema_version", meta.schema_version},
        {"columns", columns},
        {"rows", table.rows.size()},
        {"config_hash", meta.config_hash},
        {"config", meta.config_text},
        {"seed", meta.seed},
        {"model_source", meta.model_source},
        {"model_hash", meta.model_hash},
        {"code_version", meta.code_version},
        {"created_utc", meta.created_utc},
    };
    write_file(result.metadata_path, doc.dump(2) + "\n");
    return result;
}

namespace {

constexpr const char* kPlotHeader = R"(#!/usr/bin/env python3
# Generated plot script; reads CSV files from its own directory.
import csv
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name + ".csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    return rows


def col(rows, key):
    return [float(r[key]) for r in rows]


def fit_line(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    if len(pts) < 2:
        return None
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    sxx = sum((p[0] - mx) ** 2 for p in pts)
    if sxx == 0:
        return None
    beta = sum((p[0] - mx) * (p[1] - my) for p in pts) / sxx
    return beta, my - beta * mx

)";

constexpr const char* kVariancePlot = R"(
rows = load("variance_summary")
n = col(rows, "n")
fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, key, label in (
    (axes[0], "mean_l2_variance_n", r"$n\,\|\hat P_{i|V}-P_{i|V}\|_P^2$"),
    (axes[1], "mean_kl_variance_n", r"$n\,K(P_{i|V},\hat P_{i|V})$"),
):
    y = col(rows, key)
    ax.plot(n, y, "o", ms=3)
    line = fit_line(n, y)
    if line:
        beta, alpha = line
        ax.plot(n, [alpha + beta * x for x in n], ":", color="k")
    ax.set_xlabel("n")
    ax.set_ylabel(label)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "variance.png"), dpi=150)
)";

constexpr const char* kSlopePlot = R"(
rows = load("slope_path")
replica = rows[0]["replica"] if rows else "0"
rows = [r for r in rows if r["replica"] == replica]
k = col(rows, "K")
cx = col(rows, "complexity")
fig, axes = plt.subplots(1, 2, figsize=(11, 4))
axes[0].step(k, cx, where="post")
axes[0].set_xlabel("c")
axes[0].set_ylabel("complexity of the selected model")
axes[1].plot(col(rows, "criterion"), cx, "o", ms=3)
axes[1].set_xlabel("criterion")
axes[1].set_ylabel("complexity")
summary = [r for r in load("slope_summary") if r["replica"] == replica]
if summary and summary[0]["no_jump"] == "0":
    axes[0].axvline(float(summary[0]["k_min"]), ls="--", color="grey")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "slope.png"), dpi=150)
)";

constexpr const char* kRiskRatioPlot = R"(
rows = load("risk_ratio_summary")
n = col(rows, "n")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(n, col(rows, "mean_sh_ratio"), "-", label="slope heuristic")
ax.plot(n, col(rows, "mean_theory_ratio"), "--", label="theoretical constant")
ax.axhline(1.0, color="grey", lw=0.5)
ax.set_xlabel("n")
ax.set_ylabel("average risk ratio")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "risk_ratio.png"), dpi=150)
)";

} // namespace

std::string write_plot_script(const std::string& experiment, const std::string& dir) {
    const char* body = nullptr;
    if (experiment == "variance") body = kVariancePlot;
    else if (experiment == "slope") body = kSlopePlot;
    else if (experiment == "risk-ratio") body = kRiskRatioPlot;
    else throw ValidationError("no plot template for experiment '" + experiment + "'");
    ensure_dir(dir);
    std::string stem = experiment;
    for (char& c : stem) {
        if (c == '-') c = '_';
    }
    const std::string path = (fs::path(dir) / ("plot_" + stem + ".py")).string();
    write_file(path, std::string(kPlotHeader) + body);
    std::error_code ec;
    fs::permissions(path, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                    fs::perm_options::add, ec);
    return path;
}

} // namespace fieldsel
