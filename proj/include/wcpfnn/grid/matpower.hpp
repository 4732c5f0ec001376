#pragma once

// Reader and writer for the subset of the MATPOWER case format used by
// PGLib-style case files:
//
//   mpc.<name> = <scalar>;          numeric or quoted string
//   mpc.<name> = [ rows ];          whitespace/comma separated, ';' or newline ends a row
//   mpc.<name> = { ... };           cell arrays, skipped
//   % comment                       to end of line
//   function mpc = <name>           header line, ignored
//
// Required blocks: baseMVA, bus, gen, branch, gencost.

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/grid/network_case.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wcpfnn::grid {

namespace detail {

using Matrix = std::vector<std::vector<double>>;

class MatpowerLexer {
public:
    explicit MatpowerLexer(std::string_view text) : text_(text) {}

    bool at_end() {
        skip_blank(true);
        return pos_ >= text_.size();
    }

    std::size_t line() const { return line_; }
    std::size_t column() const { return pos_ - line_start_ + 1; }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line(), column()); }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void advance() {
        if (pos_ >= text_.size()) return;
        if (text_[pos_] == '\n') {
            ++line_;
            line_start_ = pos_ + 1;
        }
        ++pos_;
    }

    // Skips spaces, tabs, comments and (optionally) newlines.
    void skip_blank(bool newlines) {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
                advance();
            } else if (c == '.' && text_.substr(pos_, 3) == "...") {
                // Line continuation.
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
                advance();
            } else {
                break;
            }
        }
    }

    std::string identifier() {
        skip_blank(true);
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) advance();
        if (start == pos_) fail("expected identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_blank(true);
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
    }

    bool starts_with(std::string_view word) const { return text_.substr(pos_, word.size()) == word; }

    double number() {
        const std::size_t start = pos_;
        std::size_t end = pos_;
        while (end < text_.size()) {
            const char c = text_[end];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '+' || c == '-') {
                ++end;
            } else {
                break;
            }
        }
        std::string token(text_.substr(start, end - start));
        if (token.empty()) fail("expected number");
        double value = 0.0;
        const std::string lower = to_lower(token);
        if (lower == "inf" || lower == "+inf") {
            value = std::numeric_limits<double>::infinity();
        } else if (lower == "-inf") {
            value = -std::numeric_limits<double>::infinity();
        } else {
            const char* first = token.data();
            if (*first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
            if (ec != std::errc() || ptr != token.data() + token.size()) fail("invalid number '" + token + "'");
        }
        while (pos_ < end) advance();
        return value;
    }

    std::string quoted() {
        const char quote = peek();
        advance();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != quote && text_[pos_] != '\n') advance();
        if (peek() != quote) fail("unterminated string");
        std::string out(text_.substr(start, pos_ - start));
        advance();
        return out;
    }

    void skip_cell() {
        int depth = 0;
        do {
            const char c = peek();
            if (c == '\0') fail("unterminated cell array");
            if (c == '{') ++depth;
            if (c == '}') --depth;
            if (c == '\'' || c == '"') {
                quoted();
                continue;
            }
            advance();
        } while (depth > 0);
    }

    Matrix matrix() {
        Matrix rows;
        std::vector<double> row;
        advance();  // '['
        for (;;) {
            skip_blank(false);
            const char c = peek();
            if (c == '\0') fail("unterminated matrix");
            if (c == ']') {
                advance();
                break;
            }
            if (c == ';' || c == '\n') {
                advance();
                if (!row.empty()) rows.push_back(std::move(row));
                row.clear();
                continue;
            }
            if (c == ',') {
                advance();
                continue;
            }
            row.push_back(number());
        }
        if (!row.empty()) rows.push_back(std::move(row));
        return rows;
    }

private:
    static std::string to_lower(std::string s) {
        for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t line_start_ = 0;
};

struct RawBlocks {
    std::map<std::string, double> scalars;
    std::map<std::string, Matrix> matrices;
    std::map<std::string, std::size_t> lines;
    std::string name;
};

inline RawBlocks read_blocks(std::string_view text) {
    RawBlocks out;
    MatpowerLexer lex(text);
    while (!lex.at_end()) {
        if (lex.starts_with("function")) {
            lex.identifier();
            lex.identifier();
            lex.expect('=');
            out.name = lex.identifier();
            continue;
        }
        const std::size_t line = lex.line();
        const std::string head = lex.identifier();
        if (head != "mpc") lex.fail("expected 'mpc.<name> = ...' assignment, found '" + head + "'");
        lex.expect('.');
        const std::string name = lex.identifier();
        lex.expect('=');
        lex.skip_blank(true);
        const char c = lex.peek();
        if (c == '[') {
            out.matrices[name] = lex.matrix();
        } else if (c == '{') {
            lex.skip_cell();
        } else if (c == '\'' || c == '"') {
            lex.quoted();
        } else {
            out.scalars[name] = lex.number();
        }
        out.lines[name] = line;
        lex.skip_blank(false);
        if (lex.peek() == ';') lex.advance();
    }
    return out;
}

inline const Matrix& require_block(const RawBlocks& raw, const std::string& name, std::size_t min_columns) {
    auto it = raw.matrices.find(name);
    if (it == raw.matrices.end()) throw ParseError("missing required block mpc." + name, 0, 0);
    for (std::size_t r = 0; r < it->second.size(); ++r) {
        if (it->second[r].size() < min_columns) {
            throw ParseError("mpc." + name + " row " + std::to_string(r + 1) + " has " +
                                 std::to_string(it->second[r].size()) + " columns, expected at least " +
                                 std::to_string(min_columns),
                             raw.lines.at(name) + r + 1, 1);
        }
    }
    return it->second;
}

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Parses MATPOWER case text. Quantities are converted to per unit on baseMVA;
// out-of-service generators and branches are dropped. Transformer tap ratio and
// phase-shift columns are read but not modeled.
inline NetworkCase parse_matpower_case(std::string_view text) {
    using detail::require_block;
    const detail::RawBlocks raw = detail::read_blocks(text);

    NetworkCase c;
    c.name = raw.name;
    auto base = raw.scalars.find("baseMVA");
    if (base == raw.scalars.end()) throw ParseError("missing required block mpc.baseMVA", 0, 0);
    c.base_mva = base->second;
    if (!(c.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
    const double base_mva = c.base_mva;

    const auto& bus_rows = require_block(raw, "bus", 13);
    const auto& gen_rows = require_block(raw, "gen", 10);
    const auto& branch_rows = require_block(raw, "branch", 13);
    const auto& cost_rows = require_block(raw, "gencost", 4);

    for (std::size_t r = 0; r < bus_rows.size(); ++r) {
        const auto& row = bus_rows[r];
        Bus b;
        b.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        if (type < 1 || type > 3) {
            throw ParseError("bus " + std::to_string(b.id) + " has unsupported type " + std::to_string(type),
                             raw.lines.at("bus") + r + 1, 1);
        }
        b.type = static_cast<BusType>(type);
        b.p_demand = row[2] / base_mva;
        b.q_demand = row[3] / base_mva;
        b.shunt_g = row[4] / base_mva;
        b.shunt_b = row[5] / base_mva;
        b.base_kv = row[9];
        b.v_max = row[11];
        b.v_min = row[12];
        c.buses.push_back(b);
    }

    if (cost_rows.size() < gen_rows.size()) {
        throw ParseError("mpc.gencost has fewer rows than mpc.gen", raw.lines.at("gencost"), 1);
    }
    const bool has_q_costs = cost_rows.size() >= 2 * gen_rows.size();

    auto linear_cost = [&](std::size_t r) {
        const auto& row = cost_rows[r];
        const std::size_t line = raw.lines.at("gencost") + r + 1;
        const int model = static_cast<int>(row[0]);
        if (model != 2) throw ParseError("only polynomial cost rows (model 2) are supported", line, 1);
        const int n = static_cast<int>(row[3]);
        if (n < 0 || row.size() < static_cast<std::size_t>(4 + n)) throw ParseError("malformed gencost row", line, 1);
        if (n > 3 || (n == 3 && row[4] != 0.0)) {
            throw ParseError("nonlinear generator cost (polynomial order > 1) is not supported; only linear costs are accepted",
                             line, 1);
        }
        // Coefficients are listed highest order first; the constant term is ignored.
        return n >= 2 ? row[4 + n - 2] : 0.0;
    };

    for (std::size_t r = 0; r < gen_rows.size(); ++r) {
        const auto& row = gen_rows[r];
        const double cost = linear_cost(r);
        const double cost_q = has_q_costs ? linear_cost(gen_rows.size() + r) : 0.0;
        if (row[7] <= 0.0) continue;
        Generator g;
        g.bus_id = static_cast<int>(row[0]);
        g.q_max = row[3] / base_mva;
        g.q_min = row[4] / base_mva;
        g.v_setpoint = row[5];
        g.p_max = row[8] / base_mva;
        g.p_min = row[9] / base_mva;
        g.cost_linear = cost;
        g.cost_linear_q = cost_q;
        c.generators.push_back(g);
    }

    for (const auto& row : branch_rows) {
        if (row[10] <= 0.0) continue;
        Branch br;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.rating = row[5] / base_mva;
        c.branches.push_back(br);
    }

    validate(c);
    return c;
}

inline NetworkCase load_matpower_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open case file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    NetworkCase c = parse_matpower_case(buffer.str());
    if (c.name.empty()) {
        const auto slash = path.find_last_of('/');
        std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
        c.name = stem.substr(0, stem.find('.'));
    }
    return c;
}

// Writes a case back in the same subset grammar (MW/MVAr units).
inline std::string serialize_matpower_case(const NetworkCase& c) {
    using detail::format_number;
    const double base = c.base_mva;
    std::ostringstream out;
    out << "function mpc = " << (c.name.empty() ? "case" : c.name) << "\n\n";
    out << "mpc.version = '2';\n";
    out << "mpc.baseMVA = " << format_number(base) << ";\n\n";
    out << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
    out << "mpc.bus = [\n";
    for (const auto& b : c.buses) {
        out << '\t' << b.id << '\t' << static_cast<int>(b.type) << '\t' << format_number(b.p_demand * base) << '\t'
            << format_number(b.q_demand * base) << '\t' << format_number(b.shunt_g * base) << '\t'
            << format_number(b.shunt_b * base) << "\t1\t1\t0\t" << format_number(b.base_kv) << "\t1\t"
            << format_number(b.v_max) << '\t' << format_number(b.v_min) << ";\n";
    }
    out << "];\n\n";
    out << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n";
    out << "mpc.gen = [\n";
    for (const auto& g : c.generators) {
        out << '\t' << g.bus_id << "\t0\t0\t" << format_number(g.q_max * base) << '\t' << format_number(g.q_min * base)
            << '\t' << format_number(g.v_setpoint) << '\t' << format_number(base) << "\t1\t"
            << format_number(g.p_max * base) << '\t' << format_number(g.p_min * base) << ";\n";
    }
    out << "];\n\n";
    out << "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n";
    out << "mpc.branch = [\n";
    for (const auto& br : c.branches) {
        const std::string rate = format_number(br.rating * base);
        out << '\t' << br.from_bus << '\t' << br.to_bus << '\t' << format_number(br.r) << '\t' << format_number(br.x)
            << '\t' << format_number(br.b_charging) << '\t' << rate << '\t' << rate << '\t' << rate
            << "\t0\t0\t1\t-360\t360;\n";
    }
    out << "];\n\n";
    const bool q_costs =
        std::any_of(c.generators.begin(), c.generators.end(), [](const Generator& g) { return g.cost_linear_q != 0.0; });
    out << "%% model startup shutdown n c1 c0\n";
    out << "mpc.gencost = [\n";
    for (const auto& g : c.generators) out << "\t2\t0\t0\t2\t" << format_number(g.cost_linear) << "\t0;\n";
    if (q_costs) {
        for (const auto& g : c.generators) out << "\t2\t0\t0\t2\t" << format_number(g.cost_linear_q) << "\t0;\n";
    }
    out << "];\n";
    return out.str();
}

}  // namespace wcpfnn::grid
