#pragma once

// Experiment description language.
//
//   # comment
//   experiment brun_ch
//   gate CH(control=lower)            | gate SWAP | gate matrix [16 complex literals]
//   branch 0.5: ket "00"              | branch 0.5: vector [complex literals]
//   ctc arm=last                      (which qubit of each branch enters the curve)
//   solver { tol=1e-12, max_iter=100000, p=0, damping=0.5, initial=rho_in }
//   action solve | discriminate | correlate [semantics=mix_outputs|mix_inputs]
//        | sweep axis=<p|n|damping> grid=[...] [steps=N]
//   measure basis=<computational|diagonal>
//
// Every statement is one line except the solver block, which may span
// several. Parsing never stops at the first problem; all diagnostics for
// the file are collected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "ctc/experiments.hpp"
#include "ctc/numerics.hpp"
#include "ctc/quantum.hpp"
#include "ctc/solver.hpp"

namespace ctc::dsl {

struct Diagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    int line = 1;
    int column = 1;
    std::string message;
};

inline std::string format(const Diagnostic &d, std::string_view source_name = "") {
    std::ostringstream out;
    if (!source_name.empty()) {
        out << source_name << ':';
    }
    out << d.line << ':' << d.column << ": " << (d.severity == Diagnostic::Severity::error ? "error" : "warning")
        << ": " << d.message;
    return out.str();
}

struct GateDecl {
    std::optional<GateName> name = GateName::I;  // nullopt means an inline matrix
    ControlArm control = ControlArm::lower;
    std::optional<ComplexMatrix> matrix;

    friend bool operator==(const GateDecl &, const GateDecl &) = default;
};

struct BranchDecl {
    double weight = 1.0;
    std::string ket;              // empty when the branch is an inline vector
    std::vector<Complex> vector;

    friend bool operator==(const BranchDecl &, const BranchDecl &) = default;
};

enum class CtcArm { last, first };

struct InitialDecl {
    enum class Kind { rho_in, mixed, ket };
    Kind kind = Kind::rho_in;
    std::string ket;

    friend bool operator==(const InitialDecl &, const InitialDecl &) = default;
};

struct SolverBlock {
    double tol = 1e-12;
    int max_iter = 100000;
    double p = 0.0;
    double damping = 0.5;
    InitialDecl initial;

    friend bool operator==(const SolverBlock &, const SolverBlock &) = default;
};

enum class ActionVerb { solve, discriminate, correlate, sweep };

inline std::string_view to_string(ActionVerb v) {
    switch (v) {
        case ActionVerb::solve:
            return "solve";
        case ActionVerb::discriminate:
            return "discriminate";
        case ActionVerb::correlate:
            return "correlate";
        case ActionVerb::sweep:
            return "sweep";
    }
    return "?";
}

struct ActionDecl {
    ActionVerb verb = ActionVerb::solve;
    SweepAxis axis = SweepAxis::p;
    std::vector<double> grid;
    std::optional<int> steps;
    MixingSemantics semantics = MixingSemantics::mix_outputs;

    friend bool operator==(const ActionDecl &, const ActionDecl &) = default;
};

struct ExperimentAst {
    std::string name;
    GateDecl gate;
    std::vector<BranchDecl> branches;
    CtcArm ctc_arm = CtcArm::last;
    SolverBlock solver;
    ActionDecl action;
    MeasurementBasis basis = MeasurementBasis::computational;

    friend bool operator==(const ExperimentAst &, const ExperimentAst &) = default;
};

struct ParseResult {
    std::optional<ExperimentAst> ast;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return ast.has_value(); }
    bool has_errors() const {
        return std::any_of(diagnostics.begin(), diagnostics.end(),
                           [](const Diagnostic &d) { return d.severity == Diagnostic::Severity::error; });
    }
};

// ---------------------------------------------------------------------------
// Literals

inline std::optional<double> parse_real(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

inline std::optional<int> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

/// Complex literal `a+bi`, `a`, `bi`, `-i`; whitespace is ignored.
inline std::optional<Complex> parse_complex(std::string_view raw) {
    std::string s;
    for (char c : raw) {
        if (c != ' ' && c != '\t') {
            s.push_back(c);
        }
    }
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.back() != 'i') {
        auto re = parse_real(s);
        return re ? std::optional<Complex>(Complex{*re, 0.0}) : std::nullopt;
    }
    s.pop_back();
    // Split at the last sign that is not an exponent sign.
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    std::string_view re_part = split == std::string::npos ? std::string_view{} : std::string_view(s).substr(0, split);
    std::string_view im_part = split == std::string::npos ? std::string_view(s) : std::string_view(s).substr(split);
    double re = 0.0;
    if (!re_part.empty()) {
        auto r = parse_real(re_part);
        if (!r) {
            return std::nullopt;
        }
        re = *r;
    }
    double im = 0.0;
    if (im_part.empty() || im_part == "+") {
        im = 1.0;
    } else if (im_part == "-") {
        im = -1.0;
    } else {
        auto v = parse_real(im_part);
        if (!v) {
            return std::nullopt;
        }
        im = *v;
    }
    return Complex{re, im};
}

inline std::string format_real(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

inline std::string format_complex(Complex z) {
    std::string out = format_real(z.real());
    const double im = z.imag();
    out += std::signbit(im) ? '-' : '+';
    out += format_real(std::abs(im));
    out += 'i';
    return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

struct Line {
    int number = 0;
    std::string text;  // comment stripped
};

class Cursor {
  public:
    Cursor(std::string_view text, int line, int column_offset = 0)
        : text_(text), line_(line), column_offset_(column_offset) {}

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
            ++pos_;
        }
    }
    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }
    bool eat(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    /// Column of the next token.
    int column() {
        skip_ws();
        return static_cast<int>(pos_) + 1 + column_offset_;
    }
    int line() const { return line_; }

    std::string word() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
                static_cast<unsigned char>(c) >= 0x80) {
                ++pos_;
            } else {
                break;
            }
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    /// Token of number-ish characters; validated by the caller.
    std::string number_token() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '+' || c == '-') {
                ++pos_;
            } else {
                break;
            }
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::optional<std::string> quoted() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '"') {
            return std::nullopt;
        }
        const std::size_t close = text_.find('"', pos_ + 1);
        if (close == std::string_view::npos) {
            return std::nullopt;
        }
        std::string out(text_.substr(pos_ + 1, close - pos_ - 1));
        pos_ = close + 1;
        return out;
    }

    /// Contents of a [ ... ] list, split on commas.
    std::optional<std::vector<std::string>> bracket_list() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '[') {
            return std::nullopt;
        }
        const std::size_t close = text_.find(']', pos_ + 1);
        if (close == std::string_view::npos) {
            return std::nullopt;
        }
        std::string_view inner = text_.substr(pos_ + 1, close - pos_ - 1);
        pos_ = close + 1;
        std::vector<std::string> items;
        std::size_t start = 0;
        bool all_blank = inner.find_first_not_of(" \t") == std::string_view::npos;
        if (all_blank) {
            return items;
        }
        while (true) {
            const std::size_t comma = inner.find(',', start);
            std::string_view item = inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start);
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            items.emplace_back(b == std::string_view::npos ? std::string_view{} : item.substr(b, e - b + 1));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        return items;
    }

    std::string_view rest() {
        skip_ws();
        return text_.substr(pos_);
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 0;
    int column_offset_ = 0;
};

inline std::vector<Line> split_lines(std::string_view source) {
    std::vector<Line> lines;
    int number = 1;
    std::size_t start = 0;
    while (start <= source.size()) {
        std::size_t end = source.find('\n', start);
        std::string_view raw = source.substr(start, end == std::string_view::npos ? source.npos : end - start);
        std::string text;
        bool in_quote = false;
        for (char c : raw) {
            if (c == '"') {
                in_quote = !in_quote;
            }
            if (c == '#' && !in_quote) {
                break;
            }
            text.push_back(c);
        }
        lines.push_back({number, std::move(text)});
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
        ++number;
    }
    return lines;
}

inline bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

inline std::size_t qubits_of(std::size_t dim) {
    std::size_t q = 0;
    while ((std::size_t{1} << q) < dim) {
        ++q;
    }
    return q;
}

class Parser {
  public:
    explicit Parser(std::string_view source) : lines_(split_lines(source)) {}

    ParseResult run() {
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            Cursor c(lines_[i].text, lines_[i].number);
            if (c.at_end()) {
                continue;
            }
            const int col = c.column();
            const std::string keyword = c.word();
            if (keyword == "experiment") {
                parse_header(c, col);
            } else if (keyword == "gate") {
                parse_gate(c, col);
            } else if (keyword == "branch") {
                parse_branch(c, col);
            } else if (keyword == "ctc") {
                parse_ctc(c, col);
            } else if (keyword == "solver") {
                i = parse_solver(i, c, col);
            } else if (keyword == "action") {
                parse_action(c, col);
            } else if (keyword == "measure") {
                parse_measure(c, col);
            } else {
                error(c.line(), col,
                      keyword.empty() ? "unexpected character '" + std::string(1, c.peek()) + "'"
                                      : "unknown keyword '" + keyword + "'");
            }
        }
        validate();
        ParseResult result;
        result.diagnostics = std::move(diagnostics_);
        if (!result.has_errors()) {
            result.ast = std::move(ast_);
        }
        return result;
    }

  private:
    void error(int line, int column, std::string message) {
        diagnostics_.push_back({Diagnostic::Severity::error, line, column, std::move(message)});
    }
    void warning(int line, int column, std::string message) {
        diagnostics_.push_back({Diagnostic::Severity::warning, line, column, std::move(message)});
    }

    bool expect_end(Cursor &c) {
        if (!c.at_end()) {
            error(c.line(), c.column(), "unexpected trailing text '" + std::string(c.rest()) + "'");
            return false;
        }
        return true;
    }

    bool once(std::optional<int> &seen, int line, int col, const char *what) {
        if (seen) {
            error(line, col, std::string("duplicate ") + what + " (first at line " + std::to_string(*seen) + ")");
            return false;
        }
        seen = line;
        return true;
    }

    void parse_header(Cursor &c, int col) {
        if (!once(header_line_, c.line(), col, "experiment header")) {
            return;
        }
        const int name_col = c.column();
        std::string name = c.word();
        if (name.empty()) {
            error(c.line(), name_col, "expected experiment name");
            return;
        }
        ast_.name = std::move(name);
        expect_end(c);
    }

    void parse_gate(Cursor &c, int col) {
        if (!once(gate_line_, c.line(), col, "gate declaration")) {
            return;
        }
        const int name_col = c.column();
        const std::string name = c.word();
        if (name == "matrix") {
            const int list_col = c.column();
            auto items = c.bracket_list();
            if (!items) {
                error(c.line(), list_col, "expected '[' followed by 16 complex entries and ']'");
                return;
            }
            if (items->size() != 16) {
                error(c.line(), list_col,
                      "gate matrix needs 16 entries (4x4 row-major), got " + std::to_string(items->size()));
                return;
            }
            std::vector<Complex> entries;
            for (std::size_t k = 0; k < items->size(); ++k) {
                auto z = parse_complex((*items)[k]);
                if (!z) {
                    error(c.line(), list_col, "malformed complex literal '" + (*items)[k] + "' in gate matrix");
                    return;
                }
                entries.push_back(*z);
            }
            ComplexMatrix m(4, 4, std::move(entries));
            const double err = max_abs_diff(m * m.adjoint(), ComplexMatrix::identity(4));
            if (!(err < UnitaryGate::kUnitarityTol)) {
                error(c.line(), list_col, "gate matrix is not unitary (max|UU^dagger - I| = " + format_real(err) + ")");
                return;
            }
            ast_.gate.name = std::nullopt;
            ast_.gate.matrix = std::move(m);
            ast_.gate.control = ControlArm::lower;
            expect_end(c);
            return;
        }
        auto gate = parse_gate_name(name);
        if (!gate) {
            error(c.line(), name_col, "unknown gate '" + name + "'");
            return;
        }
        ast_.gate = GateDecl{*gate, ControlArm::lower, std::nullopt};
        if (c.eat('(')) {
            const int key_col = c.column();
            const std::string key = c.word();
            if (key != "control" || !c.eat('=')) {
                error(c.line(), key_col, "expected 'control=<upper|lower>'");
                return;
            }
            const int val_col = c.column();
            const std::string value = c.word();
            ControlArm arm = ControlArm::lower;
            if (value == "upper") {
                arm = ControlArm::upper;
            } else if (value != "lower") {
                error(c.line(), val_col, "control arm must be 'upper' or 'lower', got '" + value + "'");
                return;
            }
            if (!c.eat(')')) {
                error(c.line(), c.column(), "expected ')'");
                return;
            }
            if (is_controlled(*gate)) {
                ast_.gate.control = arm;
            } else {
                warning(c.line(), key_col, "control arm ignored for uncontrolled gate " + name);
            }
        }
        expect_end(c);
    }

    void parse_branch(Cursor &c, int col) {
        const int weight_col = c.column();
        const std::string token = c.number_token();
        auto weight = parse_real(token);
        if (!weight) {
            error(c.line(), weight_col, "malformed number '" + token + "'");
            return;
        }
        if (!(*weight > 0.0)) {
            error(c.line(), weight_col, "branch weight must be positive");
            return;
        }
        if (!c.eat(':')) {
            error(c.line(), c.column(), "expected ':' after branch weight");
            return;
        }
        const int kind_col = c.column();
        const std::string kind = c.word();
        BranchDecl branch{*weight, {}, {}};
        std::size_t dim = 0;
        if (kind == "ket") {
            const int str_col = c.column();
            auto ket = c.quoted();
            if (!ket) {
                error(c.line(), str_col, "expected quoted ket string");
                return;
            }
            auto qubits = ket_qubit_count(*ket);
            if (!qubits) {
                error(c.line(), str_col, "invalid ket \"" + *ket + "\" (symbols 0, 1, +, - or a Bell label)");
                return;
            }
            if (*qubits > 6) {
                error(c.line(), str_col, "ket \"" + *ket + "\" has more than 6 qubits");
                return;
            }
            dim = std::size_t{1} << *qubits;
            branch.ket = std::move(*ket);
        } else if (kind == "vector") {
            const int list_col = c.column();
            auto items = c.bracket_list();
            if (!items) {
                error(c.line(), list_col, "expected '[' complex amplitudes ']'");
                return;
            }
            if (!is_power_of_two(items->size()) || items->size() > 64) {
                error(c.line(), list_col,
                      "state vector length must be a power of two between 2 and 64, got " +
                          std::to_string(items->size()));
                return;
            }
            double norm = 0.0;
            for (const auto &item : *items) {
                auto z = parse_complex(item);
                if (!z) {
                    error(c.line(), list_col, "malformed complex literal '" + item + "'");
                    return;
                }
                norm += std::norm(*z);
                branch.vector.push_back(*z);
            }
            if (std::abs(norm - 1.0) > 1e-9) {
                error(c.line(), list_col, "state vector is not normalized (norm^2 = " + format_real(norm) + ")");
                return;
            }
            dim = items->size();
        } else {
            error(c.line(), kind_col, "expected 'ket' or 'vector', got '" + kind + "'");
            return;
        }
        if (!expect_end(c)) {
            return;
        }
        ast_.branches.push_back(std::move(branch));
        branch_lines_.push_back(c.line());
        branch_cols_.push_back(col);
        branch_dims_.push_back(dim);
    }

    void parse_ctc(Cursor &c, int col) {
        if (!once(ctc_line_, c.line(), col, "ctc selector")) {
            return;
        }
        const int key_col = c.column();
        if (c.word() != "arm" || !c.eat('=')) {
            error(c.line(), key_col, "expected 'arm=<last|first>'");
            return;
        }
        const int val_col = c.column();
        const std::string value = c.word();
        if (value == "last") {
            ast_.ctc_arm = CtcArm::last;
        } else if (value == "first") {
            ast_.ctc_arm = CtcArm::first;
        } else {
            error(c.line(), val_col, "ctc arm must be 'last' or 'first', got '" + value + "'");
            return;
        }
        expect_end(c);
    }

    /// Returns the index of the last line consumed.
    std::size_t parse_solver(std::size_t index, Cursor &c, int col) {
        const bool first = once(solver_line_, c.line(), col, "solver block");
        if (!c.eat('{')) {
            error(c.line(), c.column(), "expected '{' after 'solver'");
            return index;
        }
        // Gather (line, column offset, text) segments up to the closing brace.
        struct Segment {
            int line;
            int offset;
            std::string text;
        };
        std::vector<Segment> segments;
        std::string_view rest = c.rest();
        const int rest_offset = c.column() - 1;
        std::size_t i = index;
        bool closed = false;
        std::string_view current = rest;
        int offset = rest_offset;
        while (true) {
            const std::size_t brace = current.find('}');
            if (brace != std::string_view::npos) {
                segments.push_back({lines_[i].number, offset, std::string(current.substr(0, brace))});
                Cursor tail(current.substr(brace + 1), lines_[i].number, offset + static_cast<int>(brace) + 1);
                expect_end(tail);
                closed = true;
                break;
            }
            segments.push_back({lines_[i].number, offset, std::string(current)});
            if (i + 1 >= lines_.size()) {
                break;
            }
            ++i;
            current = lines_[i].text;
            offset = 0;
        }
        if (!closed) {
            error(lines_[index].number, col, "unterminated solver block (missing '}')");
            return i;
        }
        SolverBlock block = ast_.solver;
        for (const auto &seg : segments) {
            std::string_view text = seg.text;
            std::size_t start = 0;
            while (start <= text.size()) {
                const std::size_t comma = text.find(',', start);
                std::string_view item = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
                Cursor item_cursor(item, seg.line, seg.offset + static_cast<int>(start));
                if (!item_cursor.at_end()) {
                    parse_solver_item(item_cursor, block);
                }
                if (comma == std::string_view::npos) {
                    break;
                }
                start = comma + 1;
            }
        }
        if (first) {
            ast_.solver = block;
        }
        return i;
    }

    void parse_solver_item(Cursor &c, SolverBlock &block) {
        const int key_col = c.column();
        const std::string key = c.word();
        if (!c.eat('=')) {
            error(c.line(), c.column(), "expected '=' after solver key '" + key + "'");
            return;
        }
        const int val_col = c.column();
        if (key == "initial") {
            if (c.peek() == '"') {
                auto ket = c.quoted();
                if (!ket || ket_qubit_count(*ket) != std::optional<std::size_t>(1)) {
                    error(c.line(), val_col, "initial ket must be a single-qubit ket string");
                    return;
                }
                block.initial = InitialDecl{InitialDecl::Kind::ket, *ket};
            } else {
                const std::string value = c.word();
                if (value == "rho_in") {
                    block.initial = InitialDecl{};
                } else if (value == "mixed") {
                    block.initial = InitialDecl{InitialDecl::Kind::mixed, {}};
                } else {
                    error(c.line(), val_col, "initial must be rho_in, mixed or a quoted ket, got '" + value + "'");
                    return;
                }
            }
            expect_end(c);
            return;
        }
        const std::string token = c.number_token();
        if (key == "max_iter") {
            auto v = parse_int(token);
            if (!v) {
                error(c.line(), val_col, "malformed integer '" + token + "'");
            } else if (*v < 1) {
                error(c.line(), val_col, "max_iter must be positive");
            } else {
                block.max_iter = *v;
            }
            expect_end(c);
            return;
        }
        auto v = parse_real(token);
        if (key != "tol" && key != "p" && key != "damping") {
            error(c.line(), key_col, "unknown solver key '" + key + "'");
            return;
        }
        if (!v) {
            error(c.line(), val_col, "malformed number '" + token + "'");
            return;
        }
        if (key == "tol") {
            if (!(*v >= 1e-14)) {
                error(c.line(), val_col, "tol must be at least 1e-14");
            } else {
                block.tol = *v;
            }
        } else if (key == "p") {
            if (!(*v >= 0.0 && *v <= 1.0)) {
                error(c.line(), val_col, "p must lie in [0, 1]");
            } else {
                block.p = *v;
            }
        } else {
            if (!(*v > 0.0 && *v <= 1.0)) {
                error(c.line(), val_col, "damping must lie in (0, 1]");
            } else {
                block.damping = *v;
            }
        }
        expect_end(c);
    }

    void parse_action(Cursor &c, int col) {
        if (!once(action_line_, c.line(), col, "action")) {
            return;
        }
        action_col_ = col;
        const int verb_col = c.column();
        const std::string verb = c.word();
        ActionDecl action;
        if (verb == "solve") {
            action.verb = ActionVerb::solve;
        } else if (verb == "discriminate") {
            action.verb = ActionVerb::discriminate;
        } else if (verb == "correlate") {
            action.verb = ActionVerb::correlate;
        } else if (verb == "sweep") {
            action.verb = ActionVerb::sweep;
        } else {
            error(c.line(), verb_col, "unknown action '" + verb + "'");
            return;
        }
        bool have_axis = false;
        bool have_grid = false;
        while (!c.at_end()) {
            const int key_col = c.column();
            const std::string key = c.word();
            if (key.empty() || !c.eat('=')) {
                error(c.line(), key_col, "expected key=value in action");
                return;
            }
            const int val_col = c.column();
            if (action.verb == ActionVerb::correlate && key == "semantics") {
                const std::string value = c.word();
                if (value == "mix_outputs") {
                    action.semantics = MixingSemantics::mix_outputs;
                } else if (value == "mix_inputs") {
                    action.semantics = MixingSemantics::mix_inputs;
                } else {
                    error(c.line(), val_col, "semantics must be mix_outputs or mix_inputs");
                    return;
                }
            } else if (action.verb == ActionVerb::sweep && key == "axis") {
                const std::string value = c.word();
                if (value == "p") {
                    action.axis = SweepAxis::p;
                } else if (value == "n") {
                    action.axis = SweepAxis::n;
                } else if (value == "damping") {
                    action.axis = SweepAxis::damping;
                } else {
                    error(c.line(), val_col, "sweep axis must be p, n or damping");
                    return;
                }
                have_axis = true;
            } else if (action.verb == ActionVerb::sweep && key == "grid") {
                auto items = c.bracket_list();
                if (!items || items->empty()) {
                    error(c.line(), val_col, "expected nonempty grid [v1, v2, ...]");
                    return;
                }
                for (const auto &item : *items) {
                    auto v = parse_real(item);
                    if (!v) {
                        error(c.line(), val_col, "malformed number '" + item + "' in grid");
                        return;
                    }
                    action.grid.push_back(*v);
                }
                have_grid = true;
            } else if (action.verb == ActionVerb::sweep && key == "steps") {
                const std::string token = c.number_token();
                auto v = parse_int(token);
                if (!v || *v < 0) {
                    error(c.line(), val_col, "steps must be a non-negative integer, got '" + token + "'");
                    return;
                }
                action.steps = *v;
            } else {
                error(c.line(), key_col, "unknown option '" + key + "' for action " + verb);
                return;
            }
        }
        if (action.verb == ActionVerb::sweep && (!have_axis || !have_grid)) {
            error(c.line(), verb_col, "sweep needs axis=<p|n|damping> and grid=[...]");
            return;
        }
        if (action.verb == ActionVerb::sweep && action.axis == SweepAxis::n) {
            for (double g : action.grid) {
                if (g < 0.0 || g != std::floor(g) || g > 1e6) {
                    error(c.line(), verb_col, "n-axis grid values must be non-negative integers");
                    return;
                }
            }
        }
        ast_.action = std::move(action);
    }

    void parse_measure(Cursor &c, int col) {
        if (!once(measure_line_, c.line(), col, "measure")) {
            return;
        }
        const int key_col = c.column();
        if (c.word() != "basis" || !c.eat('=')) {
            error(c.line(), key_col, "expected 'basis=<computational|diagonal>'");
            return;
        }
        const int val_col = c.column();
        const std::string value = c.word();
        if (value == "computational") {
            ast_.basis = MeasurementBasis::computational;
        } else if (value == "diagonal") {
            ast_.basis = MeasurementBasis::diagonal;
        } else {
            error(c.line(), val_col, "basis must be computational or diagonal, got '" + value + "'");
            return;
        }
        expect_end(c);
    }

    void validate() {
        if (!header_line_) {
            error(1, 1, "missing experiment header");
            return;
        }
        if (!gate_line_) {
            error(*header_line_, 1, "missing gate declaration");
        }
        if (ast_.branches.empty()) {
            if (std::none_of(diagnostics_.begin(), diagnostics_.end(), [](const Diagnostic &d) {
                    return d.message.find("branch") != std::string::npos || d.message.find("ket") != std::string::npos;
                })) {
                error(*header_line_, 1, "no branches declared");
            }
            return;
        }

        double total = 0.0;
        for (const auto &b : ast_.branches) {
            total += b.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            std::string cited;
            for (std::size_t k = 0; k < branch_lines_.size(); ++k) {
                cited += (k ? ", " : "") + std::to_string(branch_lines_[k]);
            }
            error(branch_lines_.front(), branch_cols_.front(),
                  "branch weights sum to " + format_real(total) + ", expected 1 (branches at lines " + cited + ")");
        }

        for (std::size_t k = 1; k < branch_dims_.size(); ++k) {
            if (branch_dims_[k] != branch_dims_[0]) {
                error(branch_lines_[k], branch_cols_[k],
                      "branch dimension " + std::to_string(branch_dims_[k]) + " differs from dimension " +
                          std::to_string(branch_dims_[0]) + " at line " + std::to_string(branch_lines_[0]));
            }
        }

        const std::size_t qubits = qubits_of(branch_dims_[0]);
        const int action_line = action_line_.value_or(*header_line_);
        switch (ast_.action.verb) {
            case ActionVerb::discriminate:
                if (ast_.branches.size() < 2) {
                    error(action_line, action_col_, "discriminate needs at least two branches");
                }
                if (qubits > 1 && branch_dims_[0] != 4) {
                    error(action_line, action_col_, "discriminate supports one-qubit candidates or two-qubit tagged branches");
                }
                break;
            case ActionVerb::correlate:
                if (qubits < 2) {
                    error(action_line, action_col_, "correlate needs branches with a kept arm (two or more qubits)");
                }
                break;
            case ActionVerb::sweep:
                if (ast_.branches.size() != 1) {
                    error(action_line, action_col_, "sweep takes exactly one branch");
                }
                break;
            case ActionVerb::solve:
                break;
        }
        if (ast_.basis == MeasurementBasis::diagonal && ast_.action.verb != ActionVerb::discriminate) {
            warning(measure_line_.value_or(1), 1, "measurement basis only affects discriminate");
        }
    }

    std::vector<Line> lines_;
    ExperimentAst ast_;
    std::vector<Diagnostic> diagnostics_;
    std::optional<int> header_line_;
    std::optional<int> gate_line_;
    std::optional<int> ctc_line_;
    std::optional<int> solver_line_;
    std::optional<int> action_line_;
    std::optional<int> measure_line_;
    int action_col_ = 1;
    std::vector<int> branch_lines_;
    std::vector<int> branch_cols_;
    std::vector<std::size_t> branch_dims_;
};

}  // namespace detail

/// Parses experiment source text. Never throws on malformed input: either
/// an AST is returned or at least one error diagnostic.
inline ParseResult parse_experiment(std::string_view source) {
    try {
        return detail::Parser(source).run();
    } catch (const std::exception &e) {
        ParseResult r;
        r.diagnostics.push_back({Diagnostic::Severity::error, 1, 1, std::string("internal parser error: ") + e.what()});
        return r;
    }
}

/// Canonical text form; parse_experiment(serialize_experiment(ast)) == ast.
inline std::string serialize_experiment(const ExperimentAst &ast) {
    std::ostringstream out;
    out << "experiment " << ast.name << '\n';
    if (ast.gate.name) {
        out << "gate " << to_string(*ast.gate.name);
        if (is_controlled(*ast.gate.name)) {
            out << "(control=" << to_string(ast.gate.control) << ')';
        }
        out << '\n';
    } else {
        out << "gate matrix [";
        const auto entries = ast.gate.matrix->entries();
        for (std::size_t k = 0; k < entries.size(); ++k) {
            out << (k ? ", " : "") << format_complex(entries[k]);
        }
        out << "]\n";
    }
    for (const auto &b : ast.branches) {
        out << "branch " << format_real(b.weight) << ": ";
        if (!b.ket.empty()) {
            out << "ket \"" << b.ket << "\"\n";
        } else {
            out << "vector [";
            for (std::size_t k = 0; k < b.vector.size(); ++k) {
                out << (k ? ", " : "") << format_complex(b.vector[k]);
            }
            out << "]\n";
        }
    }
    out << "ctc arm=" << (ast.ctc_arm == CtcArm::last ? "last" : "first") << '\n';
    out << "solver { tol=" << format_real(ast.solver.tol) << ", max_iter=" << ast.solver.max_iter
        << ", p=" << format_real(ast.solver.p) << ", damping=" << format_real(ast.solver.damping) << ", initial=";
    switch (ast.solver.initial.kind) {
        case InitialDecl::Kind::rho_in:
            out << "rho_in";
            break;
        case InitialDecl::Kind::mixed:
            out << "mixed";
            break;
        case InitialDecl::Kind::ket:
            out << '"' << ast.solver.initial.ket << '"';
            break;
    }
    out << " }\n";
    out << "action " << to_string(ast.action.verb);
    if (ast.action.verb == ActionVerb::correlate) {
        out << " semantics=" << to_string(ast.action.semantics);
    } else if (ast.action.verb == ActionVerb::sweep) {
        out << " axis=" << to_string(ast.action.axis) << " grid=[";
        for (std::size_t k = 0; k < ast.action.grid.size(); ++k) {
            out << (k ? ", " : "") << format_real(ast.action.grid[k]);
        }
        out << ']';
        if (ast.action.steps) {
            out << " steps=" << *ast.action.steps;
        }
    }
    out << '\n';
    out << "measure basis=" << to_string(ast.basis) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// AST to library types

inline UnitaryGate make_gate(const GateDecl &gate) {
    if (gate.name) {
        return standard_gate(*gate.name, gate.control);
    }
    return UnitaryGate(*gate.matrix, "matrix");
}

inline std::vector<Complex> branch_amplitudes(const BranchDecl &b) {
    return b.ket.empty() ? b.vector : standard_ket(b.ket);
}

/// Moves qubit 0 (most significant) to the last position.
inline std::vector<Complex> rotate_first_qubit_last(const std::vector<Complex> &amps) {
    const std::size_t half = amps.size() / 2;
    std::vector<Complex> out(amps.size());
    for (std::size_t idx = 0; idx < amps.size(); ++idx) {
        const std::size_t first = idx / half;
        const std::size_t rest = idx % half;
        out[rest * 2 + first] = amps[idx];
    }
    return out;
}

/// Branches as (kept arm, CTC arm) states; the CTC arm is one qubit.
inline EnsembleSpec make_ensemble(const ExperimentAst &ast) {
    EnsembleSpec ens;
    double total = 0.0;
    for (const auto &b : ast.branches) {
        total += b.weight;
    }
    for (const auto &b : ast.branches) {
        std::vector<Complex> amps = branch_amplitudes(b);
        double norm = 0.0;
        for (const auto &z : amps) {
            norm += std::norm(z);
        }
        for (auto &z : amps) {
            z /= std::sqrt(norm);
        }
        if (ast.ctc_arm == CtcArm::first && amps.size() > 2) {
            amps = rotate_first_qubit_last(amps);
        }
        const std::size_t dim_kept = amps.size() / 2;
        ens.branches.push_back(Branch{b.weight / total, std::move(amps), dim_kept, 2});
    }
    return ens;
}

inline SolverOptions make_options(const ExperimentAst &ast) {
    SolverOptions options;
    options.tol = ast.solver.tol;
    options.max_iter = ast.solver.max_iter;
    options.p = ast.solver.p;
    options.damping = ast.solver.damping;
    switch (ast.solver.initial.kind) {
        case InitialDecl::Kind::rho_in:
            options.initial = InitialState::from_input();
            break;
        case InitialDecl::Kind::mixed:
            options.initial = InitialState::mixed();
            break;
        case InitialDecl::Kind::ket:
            options.initial = InitialState::of(standard_state(ast.solver.initial.ket));
            break;
    }
    return options;
}

/// The CTC-arm input state of a single-branch experiment (used by sweep,
/// scan and trace).
inline DensityMatrix ctc_input_state(const ExperimentAst &ast) {
    const EnsembleSpec ens = make_ensemble(ast);
    const Branch &b = ens.branches.front();
    return DensityMatrix(
        partial_trace(ComplexMatrix::outer(b.amplitudes), b.dim_kept, b.dim_ctc, Keep::second).hermitian_part());
}

/// Runs the declared action. Sweeps return one report per grid point;
/// every other action returns a single report.
inline std::vector<ExperimentReport> execute(const ExperimentAst &ast) {
    const UnitaryGate gate = make_gate(ast.gate);
    const SolverOptions options = make_options(ast);
    const EnsembleSpec ensemble = make_ensemble(ast);
    const bool single_arm = ensemble.branches.front().dim_kept == 1;

    switch (ast.action.verb) {
        case ActionVerb::solve: {
            if (single_arm && ensemble.branches.size() == 1) {
                const FixedPointResult fp = solve_fixed_point(CtcProblem::make(ctc_input_state(ast), gate, options));
                return {ctc::detail::report_from(ast.name, fp)};
            }
            const EnsembleEvolution evo = evolve_ensemble(ensemble, gate, options);
            ExperimentReport report{ast.name, evo.output, {}, std::nullopt};
            ctc::detail::summarize(report, ensemble, evo);
            return {std::move(report)};
        }
        case ActionVerb::discriminate: {
            if (single_arm) {
                DiscriminationSpec spec{{}, gate, ast.basis, options};
                for (const auto &b : ensemble.branches) {
                    spec.candidates.push_back({b.weight, b.amplitudes});
                }
                return {run_discrimination(spec, ast.name)};
            }
            return {run_ensemble_discrimination(ast.name, ensemble, gate, ast.basis, options)};
        }
        case ActionVerb::correlate:
            return {run_correlation(ast.name, ensemble, gate, options, ast.action.semantics)};
        case ActionVerb::sweep: {
            const SweepBase base{ast.name, ctc_input_state(ast), gate, options, ast.action.steps};
            return run_sweep(ast.action.axis, ast.action.grid, base);
        }
    }
    throw std::invalid_argument("execute: unknown action");
}

}  // namespace ctc::dsl
