#pragma once

// Explicitly unrolled equivalent circuits: a chain mode interacts with a
// sequence of fresh copies of the input, each interaction's lower output is
// lost, and the upper output carries the chain forward. This is the
// brute-force oracle for the iterated consistency map, so it deliberately
// goes through a multi-factor register rather than the solver's helpers.

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ctc/numerics.hpp"
#include "ctc/quantum.hpp"
#include "ctc/solver.hpp"

namespace ctc {

/// Density operator over an ordered list of tensor factors.
class Register {
  public:
    Register(std::vector<std::size_t> dims, ComplexMatrix state) : dims_(std::move(dims)), state_(std::move(state)) {
        if (!state_.is_square() || state_.rows() != total(dims_)) {
            throw std::invalid_argument("Register: state " + state_.shape() + " does not match factor dimensions");
        }
    }

    const std::vector<std::size_t> &dims() const { return dims_; }
    const ComplexMatrix &state() const { return state_; }

    /// Appends a factor in the given state as the least significant index.
    void append(const ComplexMatrix &factor) {
        state_ = tensor_product(state_, factor);
        dims_.push_back(factor.rows());
    }

    /// Applies a two-factor unitary with `upper` as the gate's first slot.
    void apply(const ComplexMatrix &gate, std::size_t upper, std::size_t lower) {
        if (upper == lower || upper >= dims_.size() || lower >= dims_.size() ||
            gate.rows() != dims_[upper] * dims_[lower]) {
            throw std::invalid_argument("Register::apply: bad factor selection");
        }
        const std::size_t n = state_.rows();
        const std::size_t dl = dims_[lower];
        ComplexMatrix op(n, n);
        std::vector<std::size_t> row_digits;
        std::vector<std::size_t> col_digits;
        for (std::size_t r = 0; r < n; ++r) {
            row_digits = digits(r);
            for (std::size_t c = 0; c < n; ++c) {
                col_digits = digits(c);
                bool spectators_match = true;
                for (std::size_t f = 0; f < dims_.size(); ++f) {
                    if (f != upper && f != lower && row_digits[f] != col_digits[f]) {
                        spectators_match = false;
                        break;
                    }
                }
                if (!spectators_match) {
                    continue;
                }
                op(r, c) = gate(row_digits[upper] * dl + row_digits[lower], col_digits[upper] * dl + col_digits[lower]);
            }
        }
        state_ = op * state_ * op.adjoint();
    }

    /// Traces out every factor not listed in `keep`; kept factors retain their order.
    void keep_only(const std::vector<std::size_t> &keep) {
        std::vector<bool> kept(dims_.size(), false);
        std::vector<std::size_t> new_dims;
        for (std::size_t f = 0; f < dims_.size(); ++f) {
            for (std::size_t k : keep) {
                if (k == f) {
                    kept[f] = true;
                }
            }
            if (kept[f]) {
                new_dims.push_back(dims_[f]);
            }
        }
        if (new_dims.empty()) {
            throw std::invalid_argument("Register::keep_only: nothing kept");
        }
        const std::size_t m = total(new_dims);
        ComplexMatrix out(m, m);
        const std::size_t n = state_.rows();
        for (std::size_t r = 0; r < n; ++r) {
            const auto rd = digits(r);
            for (std::size_t c = 0; c < n; ++c) {
                const auto cd = digits(c);
                bool diagonal_in_traced = true;
                std::size_t ro = 0;
                std::size_t co = 0;
                for (std::size_t f = 0; f < dims_.size(); ++f) {
                    if (kept[f]) {
                        ro = ro * dims_[f] + rd[f];
                        co = co * dims_[f] + cd[f];
                    } else if (rd[f] != cd[f]) {
                        diagonal_in_traced = false;
                        break;
                    }
                }
                if (diagonal_in_traced) {
                    out(ro, co) += state_(r, c);
                }
            }
        }
        dims_ = std::move(new_dims);
        state_ = std::move(out);
    }

  private:
    static std::size_t total(const std::vector<std::size_t> &dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> digits(std::size_t index) const {
        std::vector<std::size_t> d(dims_.size());
        for (std::size_t f = dims_.size(); f-- > 0;) {
            d[f] = index % dims_[f];
            index /= dims_[f];
        }
        return d;
    }

    std::vector<std::size_t> dims_;
    ComplexMatrix state_;
};

struct UnrollSpec {
    int n_copies = 1;
    std::variant<DensityMatrix, Branch> input;
    UnitaryGate gate;
    // Defaults to the CTC-bound input state.
    std::optional<DensityMatrix> chain_initial{};
    double p = 0.0;
    std::size_t dimension_cap = std::size_t{1} << 12;
};

namespace detail {

inline DensityMatrix interacting_input(const UnrollSpec &spec) {
    if (const auto *rho = std::get_if<DensityMatrix>(&spec.input)) {
        return *rho;
    }
    const auto &branch = std::get<Branch>(spec.input);
    return DensityMatrix(
        partial_trace(ComplexMatrix::outer(branch.amplitudes), branch.dim_kept, branch.dim_ctc, Keep::second)
            .hermitian_part());
}

inline void check_unroll(const UnrollSpec &spec, std::size_t input_dim, std::size_t chain_dim) {
    if (spec.n_copies < 1) {
        throw std::invalid_argument("unroll: n_copies must be positive");
    }
    if (spec.gate.dim() != input_dim * chain_dim) {
        throw std::invalid_argument("unroll: gate does not act on (input, chain)");
    }
    double dim = static_cast<double>(chain_dim);
    for (int i = 0; i < spec.n_copies; ++i) {
        dim *= static_cast<double>(input_dim);
    }
    if (dim > static_cast<double>(spec.dimension_cap)) {
        throw std::length_error("unroll: total dimension exceeds cap of " + std::to_string(spec.dimension_cap));
    }
}

}  // namespace detail

/// Chain state after n interactions with fresh input copies; lost modes are
/// traced out as soon as they leave an interaction. For a bipartite input,
/// each copy's kept arm is lost as well.
inline DensityMatrix unroll_single(const UnrollSpec &spec) {
    const DensityMatrix rho_in = detail::interacting_input(spec);
    const DensityMatrix chain0 = spec.chain_initial.value_or(rho_in);
    detail::check_unroll(spec, rho_in.dim(), chain0.dim());

    ComplexMatrix chain = chain0.matrix();
    for (int k = 0; k < spec.n_copies; ++k) {
        if (const auto *branch = std::get_if<Branch>(&spec.input)) {
            // Factors: 0 = chain, 1 = kept arm A_k, 2 = CTC-bound arm B_k.
            Register reg({chain.rows(), branch->dim_kept, branch->dim_ctc},
                         tensor_product(chain, ComplexMatrix::outer(branch->amplitudes)));
            reg.apply(spec.gate.matrix(), 2, 0);
            reg.keep_only({2});
            chain = reg.state();
        } else {
            // Factors: 0 = chain (lower slot), 1 = fresh copy (upper slot).
            Register reg({chain.rows()}, chain);
            reg.append(rho_in.matrix());
            reg.apply(spec.gate.matrix(), 1, 0);
            reg.keep_only({1});
            chain = reg.state();
        }
        chain = depolarize(chain.hermitian_part(), spec.p);
    }
    return DensityMatrix(chain.hermitian_part());
}

/// Same chain, built as one register over all copies before any trace.
/// Only practical for small n; p must be 0.
inline DensityMatrix unroll_single_deferred(const UnrollSpec &spec) {
    if (spec.p != 0.0) {
        throw std::invalid_argument("unroll_single_deferred: decoherence is not supported");
    }
    const DensityMatrix rho_in = detail::interacting_input(spec);
    const DensityMatrix chain0 = spec.chain_initial.value_or(rho_in);
    detail::check_unroll(spec, rho_in.dim(), chain0.dim());

    // Factor 0 is the initial chain mode; factor k is copy k.
    Register reg({chain0.dim()}, chain0.matrix());
    for (int k = 0; k < spec.n_copies; ++k) {
        reg.append(rho_in.matrix());
    }
    for (std::size_t k = 1; k <= static_cast<std::size_t>(spec.n_copies); ++k) {
        reg.apply(spec.gate.matrix(), k, k - 1);
    }
    reg.keep_only({static_cast<std::size_t>(spec.n_copies)});
    return DensityMatrix(reg.state().hermitian_part());
}

/// Observed joint state on (kept arm of the final copy, output mode) after
/// n chain interactions followed by the observed interaction.
inline DensityMatrix unroll_bipartite(const UnrollSpec &spec) {
    const auto *branch = std::get_if<Branch>(&spec.input);
    if (branch == nullptr) {
        throw std::invalid_argument("unroll_bipartite: input must be a bipartite pure state");
    }
    const DensityMatrix chain = unroll_single(spec);

    // Factors: 0 = kept arm A, 1 = CTC-bound arm B, 2 = chain.
    Register reg({branch->dim_kept, branch->dim_ctc}, ComplexMatrix::outer(branch->amplitudes));
    reg.append(chain.matrix());
    reg.apply(spec.gate.matrix(), 1, 2);
    reg.keep_only({0, 2});
    return DensityMatrix(reg.state().hermitian_part());
}

/// Output mode of the observed interaction for a single-arm input.
inline DensityMatrix unroll_output(const UnrollSpec &spec) {
    const DensityMatrix rho_in = detail::interacting_input(spec);
    const DensityMatrix chain = unroll_single(spec);
    Register reg({rho_in.dim()}, rho_in.matrix());
    reg.append(chain.matrix());
    reg.apply(spec.gate.matrix(), 0, 1);
    reg.keep_only({1});
    return DensityMatrix(reg.state().hermitian_part());
}

}  // namespace ctc
