#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctc/numerics.hpp"
#include "ctc/quantum.hpp"
#include "ctc/solver.hpp"

namespace ctc {

struct ExperimentReport {
    std::string name;
    DensityMatrix output_state;
    std::map<std::string, double> metrics;
    std::optional<ConvergenceTrace> trace;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
    double entropy_bits = 0.0;
    std::string error{};  // set when the run failed before producing a result
};

enum class MeasurementBasis { computational, diagonal };

inline std::string_view to_string(MeasurementBasis b) {
    return b == MeasurementBasis::computational ? "computational" : "diagonal";
}

/// Projective measurement vectors on a qubit output arm.
inline std::vector<std::vector<Complex>> basis_vectors(MeasurementBasis basis, std::size_t dim) {
    std::vector<std::vector<Complex>> out;
    if (basis == MeasurementBasis::computational) {
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<Complex> v(dim, Complex{0.0, 0.0});
            v[i] = 1.0;
            out.push_back(std::move(v));
        }
        return out;
    }
    if (dim != 2) {
        throw std::invalid_argument("diagonal basis is defined for qubits only");
    }
    out.push_back(standard_ket("+"));
    out.push_back(standard_ket("-"));
    return out;
}

/// Success probability of guessing the tag (kept arm, computational basis)
/// from the output-arm outcome, with the maximum-likelihood assignment of
/// outcomes to tags: sum_o max_t P(t, o).
inline double discrimination_success(const DensityMatrix &joint, std::size_t dim_tag, std::size_t dim_out,
                                     MeasurementBasis basis) {
    if (joint.dim() != dim_tag * dim_out) {
        throw std::invalid_argument("discrimination_success: dimension mismatch");
    }
    const auto outcomes = basis_vectors(basis, dim_out);
    double success = 0.0;
    for (const auto &o : outcomes) {
        double best = 0.0;
        for (std::size_t t = 0; t < dim_tag; ++t) {
            std::vector<Complex> tag(dim_tag, Complex{0.0, 0.0});
            tag[t] = 1.0;
            const auto v = tensor_product(std::span<const Complex>(tag), std::span<const Complex>(o));
            const auto rv = joint.matrix() * std::span<const Complex>(v);
            Complex prob{0.0, 0.0};
            for (std::size_t i = 0; i < v.size(); ++i) {
                prob += std::conj(v[i]) * rv[i];
            }
            best = std::max(best, prob.real());
        }
        success += best;
    }
    return std::clamp(success, 0.0, 1.0);
}

/// I(A:out) = S(A) + S(out) - S(A, out), in bits.
struct MutualInformation {
    double entropy_kept = 0.0;
    double entropy_out = 0.0;
    double entropy_joint = 0.0;
    double bits = 0.0;
};

inline MutualInformation mutual_information(const DensityMatrix &joint, std::size_t dim_kept, std::size_t dim_out) {
    MutualInformation mi;
    mi.entropy_kept = von_neumann_entropy(partial_trace(joint.matrix(), dim_kept, dim_out, Keep::first));
    mi.entropy_out = von_neumann_entropy(partial_trace(joint.matrix(), dim_kept, dim_out, Keep::second));
    mi.entropy_joint = von_neumann_entropy(joint);
    mi.bits = std::max(0.0, mi.entropy_kept + mi.entropy_out - mi.entropy_joint);
    return mi;
}

namespace detail {

inline void summarize(ExperimentReport &report, const EnsembleSpec &ensemble, const EnsembleEvolution &evo) {
    report.converged = evo.all_converged();
    report.iterations = 0;
    report.residual = 0.0;
    report.entropy_bits = 0.0;
    for (std::size_t k = 0; k < evo.branches.size(); ++k) {
        const auto &fp = evo.branches[k].fixed_point;
        report.iterations = std::max(report.iterations, fp.iterations);
        report.residual = std::max(report.residual, fp.residual);
        report.entropy_bits += ensemble.branches[k].weight * fp.entropy_bits;
    }
    if (!evo.branches.empty()) {
        report.trace = evo.branches.front().fixed_point.trace;
    }
}

inline std::size_t output_dim(const UnitaryGate &gate, std::size_t dim_ctc) { return gate.dim() / dim_ctc; }

}  // namespace detail

/// Discrimination with the kept arm acting as the preparer's record.
inline ExperimentReport run_ensemble_discrimination(std::string name, const EnsembleSpec &ensemble,
                                                    const UnitaryGate &gate, MeasurementBasis basis,
                                                    const SolverOptions &options) {
    EnsembleEvolution evo = evolve_ensemble(ensemble, gate, options);
    const auto &first = ensemble.branches.front();
    const std::size_t dim_out = detail::output_dim(gate, first.dim_ctc);
    const double success = discrimination_success(evo.output, first.dim_kept, dim_out, basis);
    ExperimentReport report{std::move(name), evo.output, {}, std::nullopt};
    report.metrics["success_probability"] = success;
    report.metrics["error_probability"] = 1.0 - success;
    detail::summarize(report, ensemble, evo);
    return report;
}

struct Candidate {
    double prior = 0.0;
    std::vector<Complex> ket;
};

struct DiscriminationSpec {
    std::vector<Candidate> candidates;
    UnitaryGate gate;
    MeasurementBasis measurement = MeasurementBasis::computational;
    SolverOptions options{};

    void validate() const {
        if (candidates.size() < 2) {
            throw std::invalid_argument("DiscriminationSpec: need at least two candidates");
        }
        double total = 0.0;
        for (const auto &c : candidates) {
            if (c.ket.size() != candidates.front().ket.size()) {
                throw std::invalid_argument("DiscriminationSpec: candidate dimensions differ");
            }
            total += c.prior;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("DiscriminationSpec: priors sum to " + std::to_string(total));
        }
    }
};

/// Tags candidate k with |k> on a record arm, evolves the tagged ensemble
/// and measures the output arm.
inline EnsembleSpec tagged_ensemble(const std::vector<Candidate> &candidates) {
    const std::size_t k_count = candidates.size();
    EnsembleSpec ens;
    for (std::size_t k = 0; k < k_count; ++k) {
        std::vector<Complex> tag(k_count, Complex{0.0, 0.0});
        tag[k] = 1.0;
        ens.branches.push_back(Branch{candidates[k].prior,
                                      tensor_product(std::span<const Complex>(tag),
                                                     std::span<const Complex>(candidates[k].ket)),
                                      k_count, candidates[k].ket.size()});
    }
    return ens;
}

inline ExperimentReport run_discrimination(const DiscriminationSpec &spec, std::string name = "discrimination") {
    spec.validate();
    return run_ensemble_discrimination(std::move(name), tagged_ensemble(spec.candidates), spec.gate,
                                       spec.measurement, spec.options);
}

enum class CorrelationKind { classical, entangled };

/// mix_outputs evolves each preparation branch separately (the default);
/// mix_inputs feeds the averaged input state to a single solve and exists
/// only for comparison.
enum class MixingSemantics { mix_outputs, mix_inputs };

inline std::string_view to_string(MixingSemantics s) {
    return s == MixingSemantics::mix_outputs ? "mix_outputs" : "mix_inputs";
}

inline ExperimentReport run_correlation(std::string name, const EnsembleSpec &ensemble, const UnitaryGate &gate,
                                        const SolverOptions &options,
                                        MixingSemantics semantics = MixingSemantics::mix_outputs) {
    ensemble.validate();
    const auto &first = ensemble.branches.front();
    const std::size_t dim_out = detail::output_dim(gate, first.dim_ctc);
    ExperimentReport report{std::move(name), DensityMatrix::maximally_mixed(first.dim_kept * dim_out), {},
                            std::nullopt};
    if (semantics == MixingSemantics::mix_outputs) {
        EnsembleEvolution evo = evolve_ensemble(ensemble, gate, options);
        report.output_state = evo.output;
        detail::summarize(report, ensemble, evo);
    } else {
        BranchEvolution evo =
            evolve_mixed_input(ensemble_input_state(ensemble), first.dim_kept, first.dim_ctc, gate, options);
        report.output_state = evo.output;
        report.converged = evo.fixed_point.converged;
        report.iterations = evo.fixed_point.iterations;
        report.residual = evo.fixed_point.residual;
        report.entropy_bits = evo.fixed_point.entropy_bits;
        report.trace = evo.fixed_point.trace;
    }
    const MutualInformation mi = mutual_information(report.output_state, first.dim_kept, dim_out);
    report.metrics["mutual_information_bits"] = mi.bits;
    report.metrics["entropy_kept_bits"] = mi.entropy_kept;
    report.metrics["entropy_out_bits"] = mi.entropy_out;
    report.metrics["entropy_joint_bits"] = mi.entropy_joint;
    report.metrics["mix_over_inputs"] = semantics == MixingSemantics::mix_inputs ? 1.0 : 0.0;
    return report;
}

inline EnsembleSpec correlation_ensemble(CorrelationKind kind) {
    if (kind == CorrelationKind::classical) {
        return EnsembleSpec{{Branch{0.5, standard_ket("00"), 2, 2}, Branch{0.5, standard_ket("11"), 2, 2}}};
    }
    return EnsembleSpec{{Branch{1.0, standard_ket("Phi+"), 2, 2}}};
}

/// Classical: {(1/2, |00>), (1/2, |11>)}; entangled: a single Bell branch.
inline ExperimentReport run_correlation_suite(CorrelationKind kind, const UnitaryGate &gate,
                                              const SolverOptions &options,
                                              MixingSemantics semantics = MixingSemantics::mix_outputs) {
    std::string name = kind == CorrelationKind::classical ? "classical_correlation" : "entangled_correlation";
    return run_correlation(std::move(name), correlation_ensemble(kind), gate, options, semantics);
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { p, n, damping };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::p:
            return "p";
        case SweepAxis::n:
            return "n";
        case SweepAxis::damping:
            return "damping";
    }
    return "?";
}

struct SweepBase {
    std::string name = "sweep";
    DensityMatrix rho_in;
    UnitaryGate gate;
    SolverOptions options{};
    // When set, every p/damping point runs exactly this many iterations.
    std::optional<int> steps{};
};

namespace detail {

inline std::string format_value(double x) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

inline ExperimentReport report_from(std::string name, const FixedPointResult &fp) {
    ExperimentReport r{std::move(name), fp.rho_out, {}, fp.trace};
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    r.residual = fp.residual;
    r.entropy_bits = fp.entropy_bits;
    return r;
}

inline ExperimentReport sweep_point(SweepAxis axis, double value, const SweepBase &base) {
    SolverOptions options = base.options;
    const std::string point_name = base.name + "[" + std::string(to_string(axis)) + "=" + detail::format_value(value) + "]";
    const std::size_t ctc_dim = base.gate.dim() / base.rho_in.dim();
    const DensityMatrix mixed = DensityMatrix::maximally_mixed(ctc_dim);

    switch (axis) {
        case SweepAxis::p: {
            options.p = value;
            const CtcProblem problem = CtcProblem::make(base.rho_in, base.gate, options);
            const FixedPointResult fp =
                base.steps ? iterate_fixed_steps(problem, *base.steps) : solve_fixed_point(problem);
            ExperimentReport r = report_from(point_name, fp);
            r.metrics["p"] = value;
            r.metrics["distance_to_maximally_mixed"] = trace_distance(fp.rho_star, mixed);
            if (base.steps) {
                // Envelope of the depolarized component after N blocks: (1 - a p)^N.
                const double contraction = std::pow(1.0 - options.damping * value, *base.steps);
                r.metrics["steps"] = *base.steps;
                r.metrics["envelope"] = contraction * trace_distance(problem.initial, mixed);
            }
            return r;
        }
        case SweepAxis::n: {
            const double rounded = std::round(value);
            if (rounded < 0.0 || std::abs(rounded - value) > 1e-9) {
                throw std::invalid_argument("n-axis grid values must be non-negative integers");
            }
            const int n = static_cast<int>(rounded);
            const CtcProblem problem = CtcProblem::make(base.rho_in, base.gate, options);
            const FixedPointResult fp = iterate_fixed_steps(problem, n);
            const FixedPointResult limit = solve_fixed_point(problem);
            ExperimentReport r = report_from(point_name, fp);
            r.metrics["n"] = n;
            r.metrics["population_0"] = fp.rho_star(0, 0).real();
            r.metrics["coherence"] = std::abs(fp.rho_star(0, 1));
            r.metrics["distance_to_fixed_point"] = trace_distance(fp.rho_star, limit.rho_star);
            return r;
        }
        case SweepAxis::damping: {
            options.damping = value;
            const FixedPointResult fp = solve_fixed_point(CtcProblem::make(base.rho_in, base.gate, options));
            ExperimentReport r = report_from(point_name, fp);
            r.metrics["damping"] = value;
            return r;
        }
    }
    throw std::invalid_argument("unknown sweep axis");
}

}  // namespace detail

/// Independent solves across the grid, one task per point. A point that throws is recorded with
/// failed = 1 and the sweep continues.
inline std::vector<ExperimentReport> run_sweep(SweepAxis axis, std::span<const double> grid, const SweepBase &base) {
    if (grid.empty()) {
        throw std::invalid_argument("run_sweep: empty grid");
    }
    std::vector<std::future<ExperimentReport>> pending;
    pending.reserve(grid.size());
    for (double value : grid) {
        pending.push_back(
            std::async(std::launch::async, [axis, value, &base] { return detail::sweep_point(axis, value, base); }));
    }
    std::vector<ExperimentReport> reports;
    reports.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double value = grid[k];
        try {
            reports.push_back(pending[k].get());
            reports.back().metrics["failed"] = 0.0;
        } catch (const std::exception &e) {
            const std::size_t ctc_dim = base.gate.dim() / base.rho_in.dim();
            ExperimentReport r{base.name + "[" + std::string(to_string(axis)) + "=" + detail::format_value(value) + "]",
                               DensityMatrix::maximally_mixed(ctc_dim), {}, std::nullopt};
            r.metrics[std::string(to_string(axis))] = value;
            r.metrics["failed"] = 1.0;
            r.error = e.what();
            reports.push_back(std::move(r));
        }
    }
    return reports;
}

}  // namespace ctc
