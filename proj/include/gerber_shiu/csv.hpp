#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gerber_shiu/error.hpp"
#include "gerber_shiu/solution_table.hpp"

namespace gerber_shiu {

/// 17 significant digits, locale independent.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) { row_text(header); }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_real(values[i]);
        }
        out_ << '\n';
    }

    void row_text(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void line(const std::string& text) { out_ << text << '\n'; }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

/// Writes through a temporary file and a rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) fail(ErrorKind::config, "cannot open " + tmp.string() + " for writing");
        os << content;
        if (!os) fail(ErrorKind::config, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Header u,phi[,dphi][,std_error] followed by one row per grid point.
inline std::string table_csv(const SolutionTable& table) {
    std::vector<std::string> header{"u", "phi"};
    const bool d = table.has_derivative();
    const bool s = !table.std_error.empty();
    if (d) header.push_back("dphi");
    if (s) header.push_back("std_error");
    CsvWriter w(header);
    const double scale = std::exp(table.log_scale);
    for (std::size_t i = 0; i < table.size(); ++i) {
        std::vector<double> row{table.u[i], table.phi[i] * scale};
        if (d) row.push_back(table.dphi[i] * scale);
        if (s) row.push_back(table.std_error[i]);
        w.row(row);
    }
    return w.str();
}

/// Parses a numeric CSV with a header row; returns the header and the rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    if (std::getline(is, line)) {
        std::istringstream hs(line);
        for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
    }
    while (std::getline(is, line)) {
        if (line.empty() || line.find('=') != std::string::npos) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                fail(ErrorKind::config, "csv: cannot parse '" + cell + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return {header, rows};
}

}  // namespace gerber_shiu
