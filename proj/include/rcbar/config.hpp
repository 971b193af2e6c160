#pragma once

// Model configuration files.  One schema:
//
//   # RCBAR model
//   [coeff]                       # distribution of (a_n, b_n)
//   shared = normal(0.5, 0.4)     # second normal argument is the VARIANCE
//   left   = normal(0.0, 0.3)
//   right  = normal(-0.2, 0.4)
//   [noise]                       # distribution of (eps_2n, eps_2n+1)
//   shared = exponential(1)
//   left   = exponential(2)
//   right  = exponential(3)
//   [root]                        # distribution of X_1
//   dist = constant(1)
//   [run]                         # optional defaults, overridden by flags
//   gens = 13
//   reps = 4000
//   workers = 1
//   limit_samples = 200000
//
// Families: normal(mean, variance), exponential(rate), constant(value).
// Numbers are parsed with std::from_chars, so a value round-trips to the
// exact double printed into the file.  Every diagnostic carries a
// 1-based line and column.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rcbar/model.hpp"

namespace rcbar {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int col, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(col) + ": " + what),
          line_(line),
          col_(col) {}

    int line() const { return line_; }
    int column() const { return col_; }

private:
    int line_;
    int col_;
};

struct RunDefaults {
    std::optional<unsigned> gens;
    std::optional<std::uint64_t> reps;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> limit_samples;
};

struct ConfigFile {
    ModelSpec model;
    RunDefaults run;
};

namespace detail {

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1;
    int col = 1;
};

inline void skip_ws(Cursor& c) {
    while (c.pos < c.text.size() && (c.text[c.pos] == ' ' || c.text[c.pos] == '\t')) {
        ++c.pos;
        ++c.col;
    }
}

inline double parse_number(std::string_view tok, int line, int col) {
    double out = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(line, col, "expected a number, got '" + std::string(tok) + "'");
    return out;
}

inline ComponentDist parse_component(std::string_view value, int line, int col) {
    const std::size_t open = value.find('(');
    const std::size_t close = value.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
        close != value.size() - 1)
        throw ParseError(line, col, "expected family(args), got '" + std::string(value) + "'");
    std::string_view family = value.substr(0, open);
    std::string_view args = value.substr(open + 1, close - open - 1);

    std::vector<std::pair<std::string_view, int>> parts;  // token + column
    std::size_t start = 0;
    int arg_col = col + static_cast<int>(open) + 1;
    while (start <= args.size()) {
        std::size_t comma = args.find(',', start);
        if (comma == std::string_view::npos) comma = args.size();
        std::string_view raw = args.substr(start, comma - start);
        int tok_col = arg_col + static_cast<int>(start);
        while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t')) {
            raw.remove_prefix(1);
            ++tok_col;
        }
        while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t')) raw.remove_suffix(1);
        parts.emplace_back(raw, tok_col);
        if (comma == args.size()) break;
        start = comma + 1;
    }

    auto expect_arity = [&](std::size_t n) {
        if (parts.size() != n || (n > 0 && parts[0].first.empty()))
            throw ParseError(line, col, std::string(family) + " takes " + std::to_string(n) +
                                            " argument(s)");
    };

    if (family == "normal") {
        expect_arity(2);
        const double mean = parse_number(parts[0].first, line, parts[0].second);
        const double variance = parse_number(parts[1].first, line, parts[1].second);
        if (!(variance > 0.0))
            throw ParseError(line, parts[1].second, "normal variance must be > 0");
        return Normal{mean, variance};
    }
    if (family == "exponential") {
        expect_arity(1);
        const double rate = parse_number(parts[0].first, line, parts[0].second);
        if (!(rate > 0.0)) throw ParseError(line, parts[0].second, "exponential rate must be > 0");
        return Exponential{rate};
    }
    if (family == "constant") {
        expect_arity(1);
        return Constant{parse_number(parts[0].first, line, parts[0].second)};
    }
    throw ParseError(line, col,
                     "unknown family '" + std::string(family) +
                         "' (expected normal, exponential, or constant)");
}

inline std::uint64_t parse_u64(std::string_view tok, int line, int col) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ParseError(line, col, "expected a nonnegative integer, got '" + std::string(tok) + "'");
    return out;
}

}  // namespace detail

inline ConfigFile parse_config(std::string_view text) {
    struct Slot {
        bool set = false;
        ComponentDist dist;
    };
    Slot coeff_shared, coeff_left, coeff_right;
    Slot noise_shared, noise_left, noise_right;
    Slot root_dist;
    RunDefaults run;

    std::string section;
    int section_line = 0;

    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view raw = text.substr(pos, eol - pos);
        ++line_no;
        const std::size_t line_start = pos;
        pos = eol + 1;
        if (eol == text.size() && raw.empty() && line_no > 1) break;

        std::string_view ln = raw;
        if (const std::size_t hash = ln.find('#'); hash != std::string_view::npos)
            ln = ln.substr(0, hash);
        std::size_t b = ln.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) {
            if (eol == text.size()) break;
            continue;
        }
        std::size_t e = ln.find_last_not_of(" \t\r");
        ln = ln.substr(b, e - b + 1);
        const int col0 = static_cast<int>(b) + 1;

        if (ln.front() == '[') {
            if (ln.back() != ']')
                throw ParseError(line_no, col0 + static_cast<int>(ln.size()) - 1,
                                 "unterminated section header");
            section = std::string(ln.substr(1, ln.size() - 2));
            section_line = line_no;
            if (section != "coeff" && section != "noise" && section != "root" && section != "run")
                throw ParseError(line_no, col0,
                                 "unknown section [" + section +
                                     "] (expected coeff, noise, root, or run)");
            if (eol == text.size()) break;
            continue;
        }

        const std::size_t eq = ln.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(line_no, col0, "expected 'key = value'");
        std::string_view key = ln.substr(0, eq);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.remove_suffix(1);
        std::string_view val = ln.substr(eq + 1);
        int val_col = col0 + static_cast<int>(eq) + 1;
        while (!val.empty() && (val.front() == ' ' || val.front() == '\t')) {
            val.remove_prefix(1);
            ++val_col;
        }
        if (key.empty()) throw ParseError(line_no, col0, "missing key before '='");
        if (val.empty()) throw ParseError(line_no, val_col, "missing value for '" + std::string(key) + "'");
        if (section.empty())
            throw ParseError(line_no, col0, "'" + std::string(key) + "' appears before any section");

        auto assign = [&](Slot& slot) {
            if (slot.set)
                throw ParseError(line_no, col0, "duplicate key '" + std::string(key) + "'");
            slot.dist = detail::parse_component(val, line_no, val_col);
            slot.set = true;
        };

        if (section == "coeff" || section == "noise") {
            const bool coeff = section == "coeff";
            if (key == "shared")
                assign(coeff ? coeff_shared : noise_shared);
            else if (key == "left")
                assign(coeff ? coeff_left : noise_left);
            else if (key == "right")
                assign(coeff ? coeff_right : noise_right);
            else
                throw ParseError(line_no, col0,
                                 "unknown key '" + std::string(key) + "' in [" + section +
                                     "] (expected shared, left, right)");
        } else if (section == "root") {
            if (key == "dist")
                assign(root_dist);
            else
                throw ParseError(line_no, col0,
                                 "unknown key '" + std::string(key) + "' in [root] (expected dist)");
        } else {  // run
            if (key == "gens")
                run.gens = static_cast<unsigned>(detail::parse_u64(val, line_no, val_col));
            else if (key == "reps")
                run.reps = detail::parse_u64(val, line_no, val_col);
            else if (key == "workers")
                run.workers = static_cast<unsigned>(detail::parse_u64(val, line_no, val_col));
            else if (key == "limit_samples")
                run.limit_samples = detail::parse_u64(val, line_no, val_col);
            else
                throw ParseError(line_no, col0,
                                 "unknown key '" + std::string(key) +
                                     "' in [run] (expected gens, reps, workers, limit_samples)");
        }
        (void)line_start;
        (void)section_line;
        if (eol == text.size()) break;
    }

    auto require = [&](const Slot& slot, const char* what) -> const ComponentDist& {
        if (!slot.set) throw ParseError(line_no, 1, std::string("missing ") + what);
        return slot.dist;
    };

    ConfigFile out;
    out.model.coeff = {require(coeff_shared, "[coeff] shared"), require(coeff_left, "[coeff] left"),
                       require(coeff_right, "[coeff] right")};
    out.model.noise = {require(noise_shared, "[noise] shared"), require(noise_left, "[noise] left"),
                       require(noise_right, "[noise] right")};
    out.model.root = require(root_dist, "[root] dist");
    out.run = run;
    return out;
}

inline ConfigFile load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace rcbar
