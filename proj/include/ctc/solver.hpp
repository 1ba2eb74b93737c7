#pragma once

// Deutsch consistency map for a system interacting with a closed timelike
// curve, and the iterated-map solver that realizes the unrolled equivalent
// circuit. Convention: the gate acts on (input arm, CTC arm). The consistency
// map keeps the input-arm slot (it re-enters the curve); the observed output
// is the CTC-arm slot.

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ctc/numerics.hpp"
#include "ctc/quantum.hpp"

namespace ctc {

namespace detail {

inline void require_gate_fits(const UnitaryGate &gate, std::size_t dim_in, std::size_t dim_ctc, const char *where) {
    if (gate.dim() != dim_in * dim_ctc) {
        throw std::invalid_argument(std::string(where) + ": gate dimension " + std::to_string(gate.dim()) +
                                    " does not match " + std::to_string(dim_in) + "*" + std::to_string(dim_ctc));
    }
}

inline ComplexMatrix conjugate(const ComplexMatrix &u, const ComplexMatrix &m) { return u * m * u.adjoint(); }

inline ComplexMatrix consistency_step(const ComplexMatrix &rho_in, const ComplexMatrix &gate, const ComplexMatrix &rho) {
    const ComplexMatrix joint = conjugate(gate, tensor_product(rho_in, rho));
    return partial_trace(joint, rho_in.rows(), rho.rows(), Keep::first).hermitian_part();
}

}  // namespace detail

/// Tr_2[U (rho_in (x) rho) U^dagger]: the state re-entering the curve.
inline DensityMatrix consistency_map(const DensityMatrix &rho_in, const UnitaryGate &gate, const DensityMatrix &rho) {
    detail::require_gate_fits(gate, rho_in.dim(), rho.dim(), "consistency_map");
    return DensityMatrix(detail::consistency_step(rho_in.matrix(), gate.matrix(), rho.matrix()));
}

/// Tr_1[U (rho_in (x) rho) U^dagger]: the state leaving the interaction region.
inline DensityMatrix output_state(const DensityMatrix &rho_in, const UnitaryGate &gate, const DensityMatrix &rho_star) {
    detail::require_gate_fits(gate, rho_in.dim(), rho_star.dim(), "output_state");
    const ComplexMatrix joint = detail::conjugate(gate.matrix(), tensor_product(rho_in.matrix(), rho_star.matrix()));
    return DensityMatrix(partial_trace(joint, rho_in.dim(), rho_star.dim(), Keep::second).hermitian_part());
}

/// How the CTC-arm iteration is seeded.
struct InitialState {
    enum class Kind { rho_in, maximally_mixed, explicit_state };
    Kind kind = Kind::rho_in;
    std::optional<DensityMatrix> state;

    static InitialState from_input() { return {}; }
    static InitialState mixed() { return {Kind::maximally_mixed, std::nullopt}; }
    static InitialState of(DensityMatrix rho) { return {Kind::explicit_state, std::move(rho)}; }

    DensityMatrix resolve(const DensityMatrix &rho_in, std::size_t ctc_dim) const {
        switch (kind) {
            case Kind::rho_in:
                return rho_in;
            case Kind::maximally_mixed:
                return DensityMatrix::maximally_mixed(ctc_dim);
            case Kind::explicit_state:
                return *state;
        }
        return rho_in;
    }
};

struct SolverOptions {
    double p = 0.0;          // depolarization applied to the CTC arm each iteration
    double tol = 1e-12;
    int max_iter = 100000;
    double damping = 0.5;    // 1.0 is the plain equivalent-circuit iteration
    InitialState initial;
    bool record_iterates = false;
};

struct CtcProblem {
    DensityMatrix rho_in;
    UnitaryGate gate;
    double p = 0.0;
    double tol = 1e-12;
    int max_iter = 100000;
    double damping = 0.5;
    DensityMatrix initial;
    bool record_iterates = false;

    static CtcProblem make(const DensityMatrix &rho_in, const UnitaryGate &gate, const SolverOptions &options = {}) {
        const std::size_t ctc_dim = gate.dim() / std::max<std::size_t>(1, rho_in.dim());
        CtcProblem problem{rho_in,           gate,
                           options.p,        options.tol,
                           options.max_iter, options.damping,
                           options.initial.resolve(rho_in, ctc_dim > 0 ? ctc_dim : 1),
                           options.record_iterates};
        problem.validate();
        return problem;
    }

    void validate() const {
        detail::require_gate_fits(gate, rho_in.dim(), initial.dim(), "CtcProblem");
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("CtcProblem: p outside [0, 1]");
        }
        if (!(tol >= 1e-14)) {
            throw std::invalid_argument("CtcProblem: tol must be at least 1e-14");
        }
        if (max_iter < 1) {
            throw std::invalid_argument("CtcProblem: max_iter must be positive");
        }
        if (!(damping > 0.0 && damping <= 1.0)) {
            throw std::invalid_argument("CtcProblem: damping outside (0, 1]");
        }
    }
};

struct TraceRecord {
    int step = 0;
    double successive_distance = 0.0;
    double residual = 0.0;
    double entropy_bits = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    // Iterates rho_1..rho_k, filled only when record_iterates is set.
    std::vector<ComplexMatrix> iterates;
};

struct FixedPointResult {
    DensityMatrix rho_star;
    DensityMatrix rho_out;
    double residual = 0.0;
    int iterations = 0;
    double entropy_bits = 0.0;
    ConvergenceTrace trace;
    bool converged = false;
};

namespace detail {

/// One application of the per-iteration map: depolarize(consistency_map(rho), p).
inline ComplexMatrix decohered_step(const CtcProblem &problem, const ComplexMatrix &rho) {
    return depolarize(consistency_step(problem.rho_in.matrix(), problem.gate.matrix(), rho), problem.p);
}

inline FixedPointResult iterate(const CtcProblem &problem, int steps, bool stop_on_convergence) {
    problem.validate();
    const double alpha = problem.damping;
    ComplexMatrix rho = problem.initial.matrix();
    ComplexMatrix mapped = decohered_step(problem, rho);
    ConvergenceTrace trace;
    trace.records.reserve(static_cast<std::size_t>(std::min(steps, 1 << 16)));

    double residual = trace_distance(rho, mapped);
    bool converged = false;
    int k = 0;
    while (k < steps) {
        ++k;
        ComplexMatrix next = rho * Complex{1.0 - alpha, 0.0} + mapped * Complex{alpha, 0.0};
        next = next.hermitian_part();
        const double successive = trace_distance(next, rho);
        mapped = decohered_step(problem, next);
        residual = trace_distance(next, mapped);
        rho = std::move(next);
        trace.records.push_back({k, successive, residual, von_neumann_entropy(rho)});
        if (problem.record_iterates) {
            trace.iterates.push_back(rho);
        }
        if (successive < problem.tol && residual < problem.tol) {
            converged = true;
            if (stop_on_convergence) {
                break;
            }
        } else {
            converged = false;
        }
    }

    DensityMatrix rho_star(rho);
    DensityMatrix rho_out = output_state(problem.rho_in, problem.gate, rho_star);
    const double entropy = von_neumann_entropy(rho_star);
    return FixedPointResult{std::move(rho_star), std::move(rho_out), residual, k, entropy, std::move(trace),
                            converged};
}

}  // namespace detail

/// Damped fixed-point iteration
///   rho_{k+1} = (1 - a) rho_k + a depolarize(consistency_map(rho_k), p)
/// stopping when both the successive distance and the consistency residual
/// drop below tol. Exhausting max_iter yields converged = false.
inline FixedPointResult solve_fixed_point(const CtcProblem &problem) {
    return detail::iterate(problem, problem.max_iter, true);
}

/// Exactly `steps` iterations regardless of tolerance; rho_star is rho_steps.
inline FixedPointResult iterate_fixed_steps(const CtcProblem &problem, int steps) {
    if (steps < 0) {
        throw std::invalid_argument("iterate_fixed_steps: negative step count");
    }
    if (steps == 0) {
        problem.validate();
        const ComplexMatrix mapped = detail::decohered_step(problem, problem.initial.matrix());
        DensityMatrix rho_out = output_state(problem.rho_in, problem.gate, problem.initial);
        return FixedPointResult{problem.initial,
                                std::move(rho_out),
                                trace_distance(problem.initial.matrix(), mapped),
                                0,
                                von_neumann_entropy(problem.initial),
                                {},
                                false};
    }
    return detail::iterate(problem, steps, false);
}

// ---------------------------------------------------------------------------
// Multiplicity of undecohered fixed points.

enum class Multiplicity { unique, multiple };

inline std::string_view to_string(Multiplicity m) { return m == Multiplicity::unique ? "unique" : "multiple"; }

struct MultiplicityReport {
    Multiplicity classification = Multiplicity::unique;
    std::vector<DensityMatrix> representatives;
    int samples_used = 0;
    double max_pairwise_distance = 0.0;
    int non_converged = 0;
    double cluster_threshold = 0.0;
};

/// Solves with p = 0 from I/d, rho_in and n_samples random initial states,
/// then clusters converged solutions by trace distance (100 * tol).
inline MultiplicityReport scan_multiplicity(const DensityMatrix &rho_in, const UnitaryGate &gate, int n_samples,
                                            Seed seed, SolverOptions options = {}) {
    if (n_samples < 2) {
        throw std::invalid_argument("scan_multiplicity: need at least 2 samples");
    }
    const std::size_t ctc_dim = gate.dim() / rho_in.dim();
    detail::require_gate_fits(gate, rho_in.dim(), ctc_dim, "scan_multiplicity");
    options.p = 0.0;

    std::vector<DensityMatrix> initials{DensityMatrix::maximally_mixed(ctc_dim), rho_in};
    Sampler sampler(seed);
    for (int i = 0; i < n_samples; ++i) {
        initials.emplace_back(sampler.density(ctc_dim));
    }

    MultiplicityReport report;
    report.cluster_threshold = 100.0 * options.tol;
    // Independent solves; the clustering below consumes them in launch order.
    std::vector<std::future<FixedPointResult>> pending;
    pending.reserve(initials.size());
    for (const auto &init : initials) {
        SolverOptions run = options;
        run.initial = InitialState::of(init);
        pending.push_back(std::async(std::launch::async, [&rho_in, &gate, run] {
            return solve_fixed_point(CtcProblem::make(rho_in, gate, run));
        }));
    }
    std::vector<DensityMatrix> solutions;
    for (auto &job : pending) {
        FixedPointResult result = job.get();
        ++report.samples_used;
        if (!result.converged) {
            ++report.non_converged;
            continue;
        }
        solutions.push_back(result.rho_star);
    }

    for (std::size_t i = 0; i < solutions.size(); ++i) {
        for (std::size_t j = i + 1; j < solutions.size(); ++j) {
            report.max_pairwise_distance =
                std::max(report.max_pairwise_distance, trace_distance(solutions[i], solutions[j]));
        }
        const bool known = std::any_of(report.representatives.begin(), report.representatives.end(),
                                       [&](const DensityMatrix &rep) {
                                           return trace_distance(rep, solutions[i]) <= report.cluster_threshold;
                                       });
        if (!known) {
            report.representatives.push_back(solutions[i]);
        }
    }
    report.classification = report.representatives.size() > 1 ? Multiplicity::multiple : Multiplicity::unique;
    return report;
}

// ---------------------------------------------------------------------------
// Bipartite and ensemble evolution. A branch is a pure state on (kept arm A,
// CTC-bound arm B); the CTC fixed point is solved from Tr_A and the kept arm
// stays correlated with the observed output.

struct Branch {
    double weight = 1.0;
    std::vector<Complex> amplitudes;  // on (A, B), A most significant
    std::size_t dim_kept = 1;
    std::size_t dim_ctc = 2;
};

struct EnsembleSpec {
    std::vector<Branch> branches;

    void validate() const {
        if (branches.empty()) {
            throw std::invalid_argument("EnsembleSpec: no branches");
        }
        double total = 0.0;
        for (const auto &b : branches) {
            if (!(b.weight > 0.0)) {
                throw std::invalid_argument("EnsembleSpec: branch weight must be positive");
            }
            if (b.amplitudes.size() != b.dim_kept * b.dim_ctc) {
                throw std::invalid_argument("EnsembleSpec: branch amplitude count does not match arm dimensions");
            }
            double norm = 0.0;
            for (const auto &z : b.amplitudes) {
                norm += std::norm(z);
            }
            if (std::abs(norm - 1.0) > 1e-12) {
                throw std::invalid_argument("EnsembleSpec: branch state not normalized");
            }
            total += b.weight;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("EnsembleSpec: weights sum to " + std::to_string(total));
        }
    }
};

struct BranchEvolution {
    DensityMatrix output;          // on (kept arm, observed output)
    FixedPointResult fixed_point;
};

/// Tr_B[ (I_A (x) U_BC) (rho_AB (x) rho_C) (I_A (x) U_BC)^dagger ]: the
/// observed modes (kept arm, output) for a given CTC-arm state rho_C.
inline DensityMatrix observed_output(const DensityMatrix &rho_ab, std::size_t dim_kept, std::size_t dim_ctc,
                                     const UnitaryGate &gate, const DensityMatrix &rho_c) {
    if (dim_kept * dim_ctc != rho_ab.dim()) {
        throw std::invalid_argument("observed_output: state dimension does not match arm partition");
    }
    detail::require_gate_fits(gate, dim_ctc, rho_c.dim(), "observed_output");
    const ComplexMatrix u = tensor_product(ComplexMatrix::identity(dim_kept), gate.matrix());
    const ComplexMatrix joint = detail::conjugate(u, tensor_product(rho_ab.matrix(), rho_c.matrix()));
    return DensityMatrix(partial_trace_middle(joint, dim_kept, dim_ctc, rho_c.dim()).hermitian_part());
}

/// Evolves a (possibly mixed) state on (A, B) with B entering the curve:
/// the fixed point is solved with rho_in = Tr_A rho_AB, then the observed
/// modes are read out with observed_output.
inline BranchEvolution evolve_mixed_input(const DensityMatrix &rho_ab, std::size_t dim_kept, std::size_t dim_ctc,
                                          const UnitaryGate &gate, const SolverOptions &options) {
    if (dim_kept * dim_ctc != rho_ab.dim()) {
        throw std::invalid_argument("evolve: state dimension does not match arm partition");
    }
    const DensityMatrix rho_b(partial_trace(rho_ab.matrix(), dim_kept, dim_ctc, Keep::second).hermitian_part());
    FixedPointResult fp = solve_fixed_point(CtcProblem::make(rho_b, gate, options));
    DensityMatrix out = observed_output(rho_ab, dim_kept, dim_ctc, gate, fp.rho_star);
    return {std::move(out), std::move(fp)};
}

inline BranchEvolution evolve_bipartite_branch(const Branch &branch, const UnitaryGate &gate,
                                               const SolverOptions &options) {
    return evolve_mixed_input(DensityMatrix::from_pure(branch.amplitudes), branch.dim_kept, branch.dim_ctc, gate,
                              options);
}

struct EnsembleEvolution {
    DensityMatrix output;
    std::vector<BranchEvolution> branches;

    bool all_converged() const {
        return std::all_of(branches.begin(), branches.end(),
                           [](const BranchEvolution &b) { return b.fixed_point.converged; });
    }
};

/// sum_k P_k evolve_bipartite_branch(phi_k): each branch sees only copies of
/// its own preparation.
inline EnsembleEvolution evolve_ensemble(const EnsembleSpec &ensemble, const UnitaryGate &gate,
                                         const SolverOptions &options) {
    ensemble.validate();
    std::vector<BranchEvolution> branches;
    branches.reserve(ensemble.branches.size());
    std::optional<ComplexMatrix> mix;
    for (const auto &b : ensemble.branches) {
        branches.push_back(evolve_bipartite_branch(b, gate, options));
        ComplexMatrix term = branches.back().output.matrix() * Complex{b.weight, 0.0};
        if (mix) {
            if (mix->rows() != term.rows()) {
                throw std::invalid_argument("evolve_ensemble: branches have different dimensions");
            }
            *mix += term;
        } else {
            mix = std::move(term);
        }
    }
    return {DensityMatrix(mix->hermitian_part()), std::move(branches)};
}

/// The ensemble's averaged input state on (A, B), as used by the
/// "mix over inputs" comparison semantics.
inline DensityMatrix ensemble_input_state(const EnsembleSpec &ensemble) {
    ensemble.validate();
    std::optional<ComplexMatrix> mix;
    for (const auto &b : ensemble.branches) {
        ComplexMatrix term = ComplexMatrix::outer(b.amplitudes) * Complex{b.weight, 0.0};
        if (mix) {
            *mix += term;
        } else {
            mix = std::move(term);
        }
    }
    return DensityMatrix(mix->hermitian_part());
}

}  // namespace ctc
