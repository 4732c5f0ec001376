#pragma once

// Dataset CSV: one header row
//   pd_1..pd_Nd, qd_1..qd_Nd, pg_1..pg_Ng, qg_1..qg_Ng, vr_1..vr_Nb, vi_1..vi_Nb, labeled, origin, split
// then one row per sample. Unlabeled rows leave the label fields empty.
// Numbers are written with 17 significant digits so a round trip is exact.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/grid/input_domain.hpp>
#include <wcpfnn/grid/network_case.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wcpfnn::data {

struct CsvLayout {
    std::size_t loads = 0;
    std::size_t generators = 0;
    std::size_t buses = 0;

    static CsvLayout of(const grid::NetworkCase& c) {
        return {c.load_buses().size(), c.num_generators(), c.num_buses()};
    }

    std::size_t label_columns() const { return 2 * generators + 2 * buses; }
    std::size_t columns() const { return 2 * loads + label_columns() + 3; }

    std::vector<std::string> header() const {
        std::vector<std::string> h;
        auto block = [&](const char* prefix, std::size_t count) {
            for (std::size_t i = 1; i <= count; ++i) h.push_back(std::string(prefix) + "_" + std::to_string(i));
        };
        block("pd", loads);
        block("qd", loads);
        block("pg", generators);
        block("qg", generators);
        block("vr", buses);
        block("vi", buses);
        h.insert(h.end(), {"labeled", "origin", "split"});
        return h;
    }
};

namespace detail {

inline void put_number(std::ostream& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_number(std::string_view field, std::size_t line, std::size_t column) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("invalid number '" + std::string(field) + "'", line, column);
    }
    return value;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Dataset& ds, const CsvLayout& layout) {
    const auto h = layout.header();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    for (const auto& s : ds.samples) {
        require_dimension(static_cast<std::size_t>(s.demand.size()), 2 * layout.loads, "sample demand");
        for (Eigen::Index j = 0; j < s.demand.size(); ++j) {
            if (j) out << ',';
            detail::put_number(out, s.demand[j]);
        }
        if (s.labeled) {
            require_dimension(static_cast<std::size_t>(s.generation->size()), 2 * layout.generators, "sample generation");
            require_dimension(static_cast<std::size_t>(s.voltage->size()), 2 * layout.buses, "sample voltage");
            for (Eigen::Index j = 0; j < s.generation->size(); ++j) {
                out << ',';
                detail::put_number(out, (*s.generation)[j]);
            }
            for (Eigen::Index j = 0; j < s.voltage->size(); ++j) {
                out << ',';
                detail::put_number(out, (*s.voltage)[j]);
            }
        } else {
            for (std::size_t j = 0; j < layout.label_columns(); ++j) out << ',';
        }
        out << ',' << (s.labeled ? 1 : 0) << ',' << to_string(s.origin) << ',' << to_string(s.split) << '\n';
    }
}

// Reads a dataset written by write_csv or produced externally with the same
// schema. An empty split field leaves the sample tagged train and sets
// `missing_splits` so callers can assign splits themselves.
inline Dataset read_csv(std::istream& in, const CsvLayout& layout, bool* missing_splits = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("dataset CSV is empty", 1, 1);
    const auto header = detail::split_fields(line);
    const auto expected = layout.header();
    if (header.size() != expected.size()) {
        throw DimensionError("dataset CSV has " + std::to_string(header.size()) + " columns, case needs " +
                             std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (detail::trim(header[i]) != expected[i]) {
            throw ParseError("unexpected column '" + std::string(header[i]) + "', expected '" + expected[i] + "'", 1, i + 1);
        }
    }
    if (missing_splits) *missing_splits = false;

    Dataset ds;
    const auto nd = static_cast<Eigen::Index>(2 * layout.loads);
    const auto ng = static_cast<Eigen::Index>(2 * layout.generators);
    const auto nv = static_cast<Eigen::Index>(2 * layout.buses);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        if (f.size() != layout.columns()) {
            throw DimensionError("dataset CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                 " fields, expected " + std::to_string(layout.columns()));
        }
        Sample s;
        s.demand.resize(nd);
        std::size_t col = 0;
        for (Eigen::Index j = 0; j < nd; ++j, ++col) s.demand[j] = detail::parse_number(f[col], line_no, col + 1);

        const auto flag = detail::trim(f[layout.columns() - 3]);
        if (flag == "1") {
            s.labeled = true;
        } else if (flag != "0") {
            throw ParseError("labeled must be 0 or 1", line_no, layout.columns() - 2);
        }
        if (s.labeled) {
            Eigen::VectorXd g(ng), v(nv);
            for (Eigen::Index j = 0; j < ng; ++j, ++col) g[j] = detail::parse_number(f[col], line_no, col + 1);
            for (Eigen::Index j = 0; j < nv; ++j, ++col) v[j] = detail::parse_number(f[col], line_no, col + 1);
            s.generation = std::move(g);
            s.voltage = std::move(v);
        }
        const auto origin = detail::trim(f[layout.columns() - 2]);
        if (origin == "lhs") {
            s.origin = Origin::Lhs;
        } else if (origin == "enrichment") {
            s.origin = Origin::Enrichment;
        } else {
            throw ParseError("unknown origin '" + std::string(origin) + "'", line_no, layout.columns() - 1);
        }
        const auto split = detail::trim(f[layout.columns() - 1]);
        if (split == "train" || split.empty()) {
            s.split = Split::Train;
            if (split.empty() && missing_splits) *missing_splits = true;
        } else if (split == "validation") {
            s.split = Split::Validation;
        } else if (split == "test") {
            s.split = Split::Test;
        } else {
            throw ParseError("unknown split '" + std::string(split) + "'", line_no, layout.columns());
        }
        if (!s.labeled && s.origin == Origin::Lhs) {
            throw ParseError("unlabeled rows must be enrichment points", line_no, layout.columns() - 2);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline void save_csv(const Dataset& ds, const grid::NetworkCase& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_csv(out, ds, CsvLayout::of(c));
    if (!out) throw Error("failed writing '" + path + "'");
}

// The input domain defaults to the case's standard demand box; callers with a
// provenance record override it.
inline Dataset load_csv(const std::string& path, const grid::NetworkCase& c, bool* missing_splits = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset '" + path + "'");
    Dataset ds = read_csv(in, CsvLayout::of(c), missing_splits);
    ds.domain = grid::make_input_domain(c);
    return ds;
}

}  // namespace wcpfnn::data
