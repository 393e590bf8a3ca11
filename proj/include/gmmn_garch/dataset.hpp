#pragma once

#include "gmmn_garch/core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gmmn_garch {

enum class Transform { None, Difference, LogReturns };

inline std::string to_string(Transform t) {
    switch (t) {
        case Transform::None: return "none";
        case Transform::Difference: return "difference";
        case Transform::LogReturns: return "log_returns";
    }
    return "none";
}

inline Transform parse_transform(std::string_view s) {
    if (s == "none") return Transform::None;
    if (s == "difference") return Transform::Difference;
    if (s == "log_returns") return Transform::LogReturns;
    throw ConfigError("unknown transform '" + std::string(s) + "' (expected none, difference or log_returns)");
}

/// Input problem located at a data row (1-based, header excluded) and column
/// (1-based, the time label is column 0). Zero means "not applicable".
class DatasetError : public InputError {
public:
    DatasetError(const std::string& what, std::size_t row, std::size_t column)
        : InputError(format(what, row, column)), row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const { return row_; }
    [[nodiscard]] std::size_t column() const { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column) {
        std::string s = "dataset";
        if (row) s += ": row " + std::to_string(row);
        if (row || column) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }
    std::size_t row_;
    std::size_t column_;
};

struct Dataset {
    std::vector<std::string> times;
    std::vector<std::string> columns;
    Matrix values;  // T x d, after the transform
    Transform transform = Transform::None;
    Eigen::Index tau = 0;

    [[nodiscard]] Eigen::Index length() const { return values.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return values.cols(); }
    [[nodiscard]] Matrix train() const { return values.topRows(tau); }
    [[nodiscard]] Matrix test() const { return values.bottomRows(values.rows() - tau); }
};

struct DatasetSpec {
    Transform transform = Transform::None;
    /// Training rows after the transform. 0 means use `train_fraction`.
    Eigen::Index tau = 0;
    double train_fraction = 0.5;
};

namespace detail {

/// One CSV record; handles quoted fields with embedded separators, doubled
/// quotes and line breaks. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
    fields.clear();
    std::string field;
    bool quoted = false, any = false, was_quoted = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else if (c == '\r') {
            // tolerate CRLF
        } else if (c == '\n') {
            ++line;
            fields.push_back(std::move(field));
            return true;
        } else {
            field += c;
        }
    }
    if (quoted) throw DatasetError("unterminated quoted field", 0, 0);
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Raw table: labels plus numeric cells, before any transform.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::string> times;
    Matrix values;
};

inline RawTable parse_table(std::istream& in) {
    RawTable t;
    std::vector<std::string> fields;
    std::size_t line = 1;
    if (!detail::read_csv_record(in, fields, line)) throw DatasetError("empty input", 0, 0);
    if (fields.size() < 2) throw DatasetError("header needs a time column and at least one value column", 0, 0);
    t.columns.assign(fields.begin() + 1, fields.end());
    const std::size_t d = t.columns.size();
    std::vector<double> cells;
    std::size_t row = 0;
    while (detail::read_csv_record(in, fields, line)) {
        if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
        ++row;
        if (fields.size() != d + 1)
            throw DatasetError("expected " + std::to_string(d + 1) + " cells, found " + std::to_string(fields.size()), row,
                               std::min(fields.size(), d + 1));
        if (detail::trim(fields[0]).empty()) throw DatasetError("missing time label", row, 0);
        t.times.emplace_back(detail::trim(fields[0]));
        for (std::size_t j = 1; j <= d; ++j) {
            double v;
            if (detail::trim(fields[j]).empty()) throw DatasetError("missing value", row, j);
            if (!detail::parse_double(fields[j], v)) throw DatasetError("non-numeric value '" + fields[j] + "'", row, j);
            cells.push_back(v);
        }
    }
    if (row == 0) throw DatasetError("no data rows", 0, 0);
    t.values = Eigen::Map<Matrix>(cells.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));

    // Labels are compared numerically when all parse as numbers, else as strings.
    std::vector<double> numeric(t.times.size());
    bool all_numeric = true;
    for (std::size_t i = 0; i < t.times.size() && all_numeric; ++i) all_numeric = detail::parse_double(t.times[i], numeric[i]);
    for (std::size_t i = 1; i < t.times.size(); ++i) {
        const bool increasing = all_numeric ? numeric[i] > numeric[i - 1] : t.times[i] > t.times[i - 1];
        if (!increasing) throw DatasetError("time labels are not strictly increasing", i + 1, 0);
    }
    return t;
}

/// Applies the transform and the training split.
inline Dataset make_dataset(RawTable raw, const DatasetSpec& spec) {
    Dataset ds;
    ds.columns = std::move(raw.columns);
    ds.transform = spec.transform;
    const Eigen::Index n = raw.values.rows(), d = raw.values.cols();
    if (spec.transform == Transform::None) {
        ds.values = std::move(raw.values);
        ds.times = std::move(raw.times);
    } else {
        if (n < 2) throw DatasetError("transform needs at least two rows", 0, 0);
        ds.values.resize(n - 1, d);
        for (Eigen::Index t = 1; t < n; ++t) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const double prev = raw.values(t - 1, j), cur = raw.values(t, j);
                if (spec.transform == Transform::Difference) {
                    ds.values(t - 1, j) = cur - prev;
                } else {
                    if (!(prev > 0.0)) throw DatasetError("log_returns requires positive values", static_cast<std::size_t>(t), static_cast<std::size_t>(j + 1));
                    if (!(cur > 0.0)) throw DatasetError("log_returns requires positive values", static_cast<std::size_t>(t + 1), static_cast<std::size_t>(j + 1));
                    ds.values(t - 1, j) = std::log(cur / prev);
                }
            }
        }
        ds.times.assign(raw.times.begin() + 1, raw.times.end());
    }
    const Eigen::Index T = ds.values.rows();
    if (spec.tau > 0) {
        ds.tau = spec.tau;
    } else {
        if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
            throw ConfigError("dataset: train_fraction must lie in (0, 1)");
        ds.tau = static_cast<Eigen::Index>(std::floor(spec.train_fraction * static_cast<double>(T)));
    }
    if (ds.tau < 1 || ds.tau >= T)
        throw ConfigError("dataset: training cut " + std::to_string(ds.tau) + " must satisfy 1 <= tau < T = " + std::to_string(T));
    return ds;
}

inline Dataset parse_dataset(const std::string& text, const DatasetSpec& spec) {
    std::istringstream in(text);
    return make_dataset(parse_table(in), spec);
}

inline Dataset load_dataset(const std::string& path, const DatasetSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("dataset: cannot open '" + path + "'");
    return make_dataset(parse_table(in), spec);
}

/// Writes a table with a time column in the same format load_dataset reads.
inline void write_table(std::ostream& out, const std::vector<std::string>& columns, const std::vector<std::string>& times,
                        const Matrix& values) {
    require(static_cast<Eigen::Index>(columns.size()) == values.cols() &&
                static_cast<Eigen::Index>(times.size()) == values.rows(),
            "write_table: shape mismatch");
    out << "time";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    char buf[32];
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
        out << times[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const auto r = std::to_chars(buf, buf + sizeof buf, values(t, j));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
        }
        out << '\n';
    }
}

}  // namespace gmmn_garch
