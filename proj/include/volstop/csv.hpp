#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "volstop/errors.hpp"

namespace volstop {

// Shortest decimal form that round-trips a double exactly.
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Comma-separated, one header row, LF line endings, full-precision numbers.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::span<const std::string> columns)
        : out_(path, std::ios::binary), n_columns_(columns.size()) {
        if (!out_) throw Error(ErrorCode::BadConfig, "cannot open " + path + " for writing");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    void row(std::span<const double> values) {
        if (values.size() != n_columns_)
            throw Error(ErrorCode::BadConfig, "CSV row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_full(values[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t n_columns_;
};

}  // namespace volstop
