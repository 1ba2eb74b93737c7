#pragma once

// ctcsim command-line front end: solve | run | sweep | scan | trace.
// Exit codes: 0 success, 1 diagnostics or bad input, 2 non-convergence.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctc/dsl.hpp"
#include "ctc/equivalent_circuit.hpp"
#include "ctc/experiments.hpp"
#include "ctc/solver.hpp"

namespace ctc::cli {

enum ExitCode : int { kOk = 0, kDiagnostics = 1, kNotConverged = 2 };

inline nlohmann::json matrix_json(const ComplexMatrix &m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            row.push_back({m(i, j).real(), m(i, j).imag()});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Every report carries the same top-level fields; metric keys are sorted.
inline nlohmann::json report_json(const ExperimentReport &r) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto &[key, value] : r.metrics) {
        metrics[key] = value;
    }
    nlohmann::json j;
    j["experiment"] = r.name;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["residual"] = r.residual;
    j["entropy_bits"] = r.entropy_bits;
    j["metrics"] = std::move(metrics);
    j["rho_out"] = matrix_json(r.output_state.matrix());
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    return j;
}

inline nlohmann::json multiplicity_json(const std::string &name, const MultiplicityReport &m) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto &rho : m.representatives) {
        reps.push_back(matrix_json(rho.matrix()));
    }
    return {{"experiment", name},
            {"classification", std::string(to_string(m.classification))},
            {"samples_used", m.samples_used},
            {"non_converged", m.non_converged},
            {"max_pairwise_distance", m.max_pairwise_distance},
            {"cluster_threshold", m.cluster_threshold},
            {"representatives", std::move(reps)}};
}

inline void write_trace_csv(const ConvergenceTrace &trace, std::ostream &out) {
    out << "step,successive_distance,residual,entropy_bits\n";
    out << std::setprecision(17);
    for (const auto &rec : trace.records) {
        out << rec.step << ',' << rec.successive_distance << ',' << rec.residual << ',' << rec.entropy_bits << '\n';
    }
}

inline void write_text(const ExperimentReport &r, std::ostream &out) {
    out << "experiment " << r.name << '\n';
    if (!r.error.empty()) {
        out << "  error: " << r.error << '\n';
    }
    out << "  converged " << (r.converged ? "yes" : "no") << " after " << r.iterations << " iterations, residual "
        << r.residual << '\n';
    out << "  entropy_bits " << r.entropy_bits << '\n';
    for (const auto &[key, value] : r.metrics) {
        out << "  " << key << " = " << std::setprecision(12) << value << '\n';
    }
    out << "  rho_out\n";
    const auto &m = r.output_state.matrix();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out << "   ";
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out << ' ' << dsl::format_complex(m(i, j));
        }
        out << '\n';
    }
}

namespace detail {

/// Writes to `path`, or to `out` when path is "-".
inline bool emit(const std::string &path, const std::string &text, std::ostream &out, std::ostream &err) {
    if (path == "-") {
        out << text;
        return true;
    }
    std::ofstream file(path);
    if (!file) {
        err << "error: cannot write " << path << '\n';
        return false;
    }
    file << text;
    return static_cast<bool>(file);
}

inline std::optional<dsl::ExperimentAst> load(const std::string &path, std::ostream &err) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        err << path << ": error: cannot open file\n";
        return std::nullopt;
    }
    std::stringstream buffer;
    buffer << file.rdbuf();
    dsl::ParseResult parsed = dsl::parse_experiment(buffer.str());
    for (const auto &d : parsed.diagnostics) {
        err << dsl::format(d, path) << '\n';
    }
    return std::move(parsed.ast);
}

inline std::vector<double> parse_grid(const std::string &text) {
    std::vector<double> grid;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto v = dsl::parse_real(item);
        if (!v) {
            throw std::invalid_argument("malformed grid value '" + item + "'");
        }
        grid.push_back(*v);
    }
    if (grid.empty()) {
        throw std::invalid_argument("empty grid");
    }
    return grid;
}

/// Unrolled depth-n circuit against the undamped n-th iterate (same
/// decoherence). Distances are maxima over branches, on the observed modes.
inline void oracle_check(const dsl::ExperimentAst &ast, int depth, ExperimentReport &report) {
    const UnitaryGate gate = dsl::make_gate(ast.gate);
    SolverOptions options = dsl::make_options(ast);
    options.damping = 1.0;
    const EnsembleSpec ensemble = dsl::make_ensemble(ast);
    double to_iterate = 0.0;
    double to_fixed_point = 0.0;
    for (const auto &b : ensemble.branches) {
        const DensityMatrix rho_ab = DensityMatrix::from_pure(b.amplitudes);
        const DensityMatrix rho_b(
            partial_trace(rho_ab.matrix(), b.dim_kept, b.dim_ctc, Keep::second).hermitian_part());
        const CtcProblem problem = CtcProblem::make(rho_b, gate, options);
        const DensityMatrix iterate = iterate_fixed_steps(problem, depth).rho_star;
        const DensityMatrix limit = solve_fixed_point(problem).rho_star;

        UnrollSpec spec{depth, b, gate, problem.initial, options.p};
        const DensityMatrix unrolled = unroll_bipartite(spec);
        to_iterate = std::max(to_iterate,
                              trace_distance(unrolled, observed_output(rho_ab, b.dim_kept, b.dim_ctc, gate, iterate)));
        to_fixed_point = std::max(
            to_fixed_point, trace_distance(unrolled, observed_output(rho_ab, b.dim_kept, b.dim_ctc, gate, limit)));
    }
    report.metrics["oracle_depth"] = depth;
    report.metrics["oracle_distance"] = to_iterate;
    report.metrics["oracle_distance_to_fixed_point"] = to_fixed_point;
}

inline int exit_for(const std::vector<ExperimentReport> &reports, bool fixed_steps) {
    for (const auto &r : reports) {
        if (!r.error.empty()) {
            return kNotConverged;
        }
        if (!fixed_steps && !r.converged) {
            return kNotConverged;
        }
    }
    return kOk;
}

inline bool emit_reports(const std::vector<ExperimentReport> &reports, bool as_array, const std::string &json_path,
                         std::ostream &out, std::ostream &err) {
    for (const auto &r : reports) {
        write_text(r, json_path == "-" ? err : out);
    }
    if (json_path.empty()) {
        return true;
    }
    nlohmann::json j;
    if (as_array) {
        j = nlohmann::json::array();
        for (const auto &r : reports) {
            j.push_back(report_json(r));
        }
    } else {
        j = report_json(reports.front());
    }
    return emit(json_path, j.dump(2) + "\n", out, err);
}

inline bool emit_trace(const ExperimentReport &r, const std::string &path, std::ostream &out, std::ostream &err) {
    if (path.empty()) {
        return true;
    }
    if (!r.trace) {
        err << "error: no convergence trace for " << r.name << '\n';
        return false;
    }
    std::ostringstream csv;
    write_trace_csv(*r.trace, csv);
    return emit(path, csv.str(), out, err);
}

}  // namespace detail

inline int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Deutsch CTC fixed-point simulator"};
    app.require_subcommand(1);

    std::string file;
    std::string json_path;
    std::string csv_path;
    std::uint64_t seed = 1;

    auto *run = app.add_subcommand("run", "execute an experiment file");
    int oracle_depth = 0;
    run->add_option("-f,--file", file, "experiment file")->required();
    run->add_option("--json", json_path, "write the JSON report here ('-' for stdout)");
    run->add_option("--csv-trace", csv_path, "write the convergence trace CSV here ('-' for stdout)");
    run->add_option("--seed", seed, "random seed");
    run->add_option("--oracle-check", oracle_depth, "also unroll the equivalent circuit to this depth")
        ->check(CLI::Range(1, 64));

    auto *sweep = app.add_subcommand("sweep", "parameter sweep over one axis");
    std::string axis_name;
    std::string grid_text;
    std::optional<int> sweep_steps;
    sweep->add_option("-f,--file", file, "experiment file")->required();
    sweep->add_option("--axis", axis_name, "p, n or damping (overrides the file)")
        ->check(CLI::IsMember({"p", "n", "damping"}));
    sweep->add_option("--grid", grid_text, "comma-separated grid (overrides the file)");
    sweep->add_option("--steps", sweep_steps, "fixed iteration count per point")->check(CLI::NonNegativeNumber);
    sweep->add_option("--json", json_path, "write the JSON reports here ('-' for stdout)");

    auto *scan = app.add_subcommand("scan", "classify fixed-point multiplicity");
    int samples = 16;
    scan->add_option("-f,--file", file, "experiment file")->required();
    scan->add_option("--samples", samples, "random initial states")->check(CLI::Range(2, 100000));
    scan->add_option("--seed", seed, "random seed");
    scan->add_option("--json", json_path, "write the JSON report here ('-' for stdout)");

    auto *trace = app.add_subcommand("trace", "convergence trace of a single-input experiment");
    trace->add_option("-f,--file", file, "experiment file")->required();
    trace->add_option("--csv", csv_path, "write CSV here instead of stdout");

    auto *solve = app.add_subcommand("solve", "solve one problem given on the command line");
    std::string gate_name = "CH";
    std::string control = "lower";
    std::string state = "-";
    std::string initial = "rho_in";
    SolverOptions options;
    solve->add_option("--gate", gate_name, "I, X, Z, H, SWAP, CNOT or CH");
    solve->add_option("--control", control, "control arm")->check(CLI::IsMember({"upper", "lower"}));
    solve->add_option("--state", state, "one-qubit input ket: 0, 1, + or -");
    solve->add_option("--p", options.p, "depolarizing strength")->check(CLI::Range(0.0, 1.0));
    solve->add_option("--tol", options.tol, "convergence tolerance");
    solve->add_option("--max-iter", options.max_iter, "iteration budget")->check(CLI::PositiveNumber);
    solve->add_option("--damping", options.damping, "damping factor in (0, 1]");
    solve->add_option("--initial", initial, "rho_in, mixed or a one-qubit ket");
    solve->add_option("--json", json_path, "write the JSON report here ('-' for stdout)");
    solve->add_option("--csv-trace", csv_path, "write the convergence trace CSV here ('-' for stdout)");

    std::vector<std::string> argv_store{"ctcsim"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char *> argv;
    for (const auto &a : argv_store) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kDiagnostics;
    }

    try {
        if (*solve) {
            auto gate = parse_gate_name(gate_name);
            if (!gate) {
                err << "error: unknown gate '" << gate_name << "'\n";
                return kDiagnostics;
            }
            if (ket_qubit_count(state) != std::optional<std::size_t>(1)) {
                err << "error: --state must be a one-qubit ket\n";
                return kDiagnostics;
            }
            if (initial == "mixed") {
                options.initial = InitialState::mixed();
            } else if (initial != "rho_in") {
                if (ket_qubit_count(initial) != std::optional<std::size_t>(1)) {
                    err << "error: --initial must be rho_in, mixed or a one-qubit ket\n";
                    return kDiagnostics;
                }
                options.initial = InitialState::of(standard_state(initial));
            }
            const UnitaryGate u =
                standard_gate(*gate, control == "upper" ? ControlArm::upper : ControlArm::lower);
            const FixedPointResult fp = solve_fixed_point(CtcProblem::make(standard_state(state), u, options));
            ExperimentReport report = ctc::detail::report_from(u.label() + " on |" + state + ">", fp);
            if (!detail::emit_reports({report}, false, json_path, out, err) ||
                !detail::emit_trace(report, csv_path, out, err)) {
                return kDiagnostics;
            }
            return report.converged ? kOk : kNotConverged;
        }

        auto ast = detail::load(file, err);
        if (!ast) {
            return kDiagnostics;
        }

        if (*run) {
            std::vector<ExperimentReport> reports = dsl::execute(*ast);
            if (oracle_depth > 0) {
                detail::oracle_check(*ast, oracle_depth, reports.front());
            }
            const bool is_sweep = ast->action.verb == dsl::ActionVerb::sweep;
            if (!detail::emit_reports(reports, is_sweep, json_path, out, err) ||
                !detail::emit_trace(reports.front(), csv_path, out, err)) {
                return kDiagnostics;
            }
            return detail::exit_for(reports, is_sweep && (ast->action.steps || ast->action.axis == SweepAxis::n));
        }

        if (*sweep) {
            if (ast->branches.size() != 1) {
                err << file << ": error: sweep takes exactly one branch\n";
                return kDiagnostics;
            }
            dsl::ActionDecl action = ast->action.verb == dsl::ActionVerb::sweep ? ast->action : dsl::ActionDecl{};
            action.verb = dsl::ActionVerb::sweep;
            if (!axis_name.empty()) {
                action.axis = axis_name == "p" ? SweepAxis::p : axis_name == "n" ? SweepAxis::n : SweepAxis::damping;
            }
            if (!grid_text.empty()) {
                action.grid = detail::parse_grid(grid_text);
            }
            if (sweep_steps) {
                action.steps = sweep_steps;
            }
            if (action.grid.empty()) {
                err << file << ": error: no sweep grid (give --grid or a sweep action)\n";
                return kDiagnostics;
            }
            ast->action = action;
            std::vector<ExperimentReport> reports = dsl::execute(*ast);
            if (!detail::emit_reports(reports, true, json_path, out, err)) {
                return kDiagnostics;
            }
            return detail::exit_for(reports, action.steps || action.axis == SweepAxis::n);
        }

        if (*scan) {
            if (ast->branches.size() != 1) {
                err << file << ": error: scan takes exactly one branch\n";
                return kDiagnostics;
            }
            const MultiplicityReport m = scan_multiplicity(dsl::ctc_input_state(*ast), dsl::make_gate(ast->gate),
                                                           samples, Seed{seed}, dsl::make_options(*ast));
            std::ostream &text = json_path == "-" ? err : out;
            text << "experiment " << ast->name << "\n  classification " << to_string(m.classification)
                 << "\n  representatives " << m.representatives.size() << "\n  samples_used " << m.samples_used
                 << "\n  non_converged " << m.non_converged << "\n  max_pairwise_distance " << m.max_pairwise_distance
                 << '\n';
            if (!json_path.empty() &&
                !detail::emit(json_path, multiplicity_json(ast->name, m).dump(2) + "\n", out, err)) {
                return kDiagnostics;
            }
            return m.non_converged > 0 ? kNotConverged : kOk;
        }

        if (*trace) {
            if (ast->branches.size() != 1) {
                err << file << ": error: trace takes exactly one branch\n";
                return kDiagnostics;
            }
            const FixedPointResult fp = solve_fixed_point(
                CtcProblem::make(dsl::ctc_input_state(*ast), dsl::make_gate(ast->gate), dsl::make_options(*ast)));
            std::ostringstream csv;
            write_trace_csv(fp.trace, csv);
            if (!detail::emit(csv_path.empty() ? "-" : csv_path, csv.str(), out, err)) {
                return kDiagnostics;
            }
            return fp.converged ? kOk : kNotConverged;
        }
    } catch (const std::length_error &e) {
        err << "error: " << e.what() << '\n';
        return kDiagnostics;
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << '\n';
        return kDiagnostics;
    }
    return kDiagnostics;
}

}  // namespace ctc::cli
