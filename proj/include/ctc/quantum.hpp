#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctc/numerics.hpp"

namespace ctc {

/// Hermitian, unit-trace, positive semidefinite operator.
class DensityMatrix {
  public:
    static constexpr double kHermitianTol = 1e-10;
    static constexpr double kTraceTol = 1e-10;
    static constexpr double kPositivityTol = 1e-9;

    explicit DensityMatrix(ComplexMatrix m) : matrix_(std::move(m)) { validate(); }

    static DensityMatrix from_pure(std::span<const Complex> ket) {
        double norm = 0.0;
        for (const auto &z : ket) {
            norm += std::norm(z);
        }
        if (std::abs(norm - 1.0) > 1e-10) {
            throw std::invalid_argument("DensityMatrix::from_pure: state vector not normalized (norm^2 = " +
                                        std::to_string(norm) + ")");
        }
        return DensityMatrix(ComplexMatrix::outer(ket));
    }

    static DensityMatrix maximally_mixed(std::size_t dim) {
        ComplexMatrix m = ComplexMatrix::identity(dim);
        m *= Complex{1.0 / static_cast<double>(dim), 0.0};
        return DensityMatrix(std::move(m));
    }

    std::size_t dim() const { return matrix_.rows(); }
    const ComplexMatrix &matrix() const { return matrix_; }
    Complex operator()(std::size_t i, std::size_t j) const { return matrix_(i, j); }

    friend bool operator==(const DensityMatrix &, const DensityMatrix &) = default;

  private:
    void validate() const {
        if (!matrix_.is_square()) {
            throw std::invalid_argument("DensityMatrix: matrix is " + matrix_.shape());
        }
        if (max_abs_diff(matrix_, matrix_.adjoint()) >= kHermitianTol) {
            throw std::invalid_argument("DensityMatrix: not Hermitian");
        }
        const Complex tr = matrix_.trace();
        if (std::abs(tr - Complex{1.0, 0.0}) >= kTraceTol) {
            throw std::invalid_argument("DensityMatrix: trace " + std::to_string(tr.real()) + " is not 1");
        }
        const auto eig = eig_hermitian(matrix_);
        if (eig.values.back() <= -kPositivityTol) {
            throw std::invalid_argument("DensityMatrix: negative eigenvalue " + std::to_string(eig.values.back()));
        }
    }

    ComplexMatrix matrix_;
};

inline double von_neumann_entropy(const DensityMatrix &rho) { return von_neumann_entropy(rho.matrix()); }

inline double trace_distance(const DensityMatrix &a, const DensityMatrix &b) {
    return trace_distance(a.matrix(), b.matrix());
}

class UnitaryGate {
  public:
    static constexpr double kUnitarityTol = 1e-12;

    UnitaryGate(ComplexMatrix m, std::string label) : matrix_(std::move(m)), label_(std::move(label)) {
        if (!matrix_.is_square()) {
            throw std::invalid_argument("UnitaryGate: matrix is " + matrix_.shape());
        }
        const double err = max_abs_diff(matrix_ * matrix_.adjoint(), ComplexMatrix::identity(matrix_.rows()));
        if (err >= kUnitarityTol) {
            throw std::invalid_argument("UnitaryGate '" + label_ + "': max|UU^dagger - I| = " + std::to_string(err));
        }
    }

    std::size_t dim() const { return matrix_.rows(); }
    const ComplexMatrix &matrix() const { return matrix_; }
    const std::string &label() const { return label_; }

  private:
    ComplexMatrix matrix_;
    std::string label_;
};

/// Completely positive trace-preserving map given by Kraus operators.
class KrausChannel {
  public:
    static constexpr double kCompletenessTol = 1e-10;

    explicit KrausChannel(std::vector<ComplexMatrix> operators) : operators_(std::move(operators)) {
        if (operators_.empty()) {
            throw std::invalid_argument("KrausChannel: no operators");
        }
        const std::size_t d = operators_.front().cols();
        ComplexMatrix sum(d, d);
        for (const auto &e : operators_) {
            if (e.cols() != d || e.rows() != operators_.front().rows()) {
                throw std::invalid_argument("KrausChannel: operators have inconsistent shapes");
            }
            sum += e.adjoint() * e;
        }
        const double err = max_abs_diff(sum, ComplexMatrix::identity(d));
        if (err >= kCompletenessTol) {
            throw std::invalid_argument("KrausChannel: sum E^dagger E deviates from I by " + std::to_string(err));
        }
    }

    const std::vector<ComplexMatrix> &operators() const { return operators_; }
    std::size_t input_dim() const { return operators_.front().cols(); }

  private:
    std::vector<ComplexMatrix> operators_;
};

inline DensityMatrix apply_channel(const KrausChannel &channel, const DensityMatrix &rho) {
    if (rho.dim() != channel.input_dim()) {
        throw std::invalid_argument("apply_channel: state dimension does not match channel");
    }
    const std::size_t out_dim = channel.operators().front().rows();
    ComplexMatrix out(out_dim, out_dim);
    for (const auto &e : channel.operators()) {
        out += e * rho.matrix() * e.adjoint();
    }
    return DensityMatrix(out.hermitian_part());
}

/// (1 - p) rho + p I/d.
inline ComplexMatrix depolarize(const ComplexMatrix &rho, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("depolarize: p = " + std::to_string(p) + " outside [0, 1]");
    }
    if (p == 0.0) {
        return rho;
    }
    const std::size_t d = rho.rows();
    ComplexMatrix out = rho * Complex{1.0 - p, 0.0};
    const double shift = p / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
        out(i, i) += shift;
    }
    return out;
}

inline DensityMatrix depolarize(const DensityMatrix &rho, double p) {
    return DensityMatrix(depolarize(rho.matrix(), p));
}

// ---------------------------------------------------------------------------
// Standard gates and states. Two-qubit gates act on (upper, lower), with the
// upper arm (the interacting input) as the most significant index and the
// lower arm as the closed-timelike-curve mode.

enum class GateName { I, X, Z, H, SWAP, CNOT, CH };
enum class ControlArm { upper, lower };

inline bool is_controlled(GateName name) { return name == GateName::CNOT || name == GateName::CH; }

inline std::string_view to_string(GateName name) {
    switch (name) {
        case GateName::I:
            return "I";
        case GateName::X:
            return "X";
        case GateName::Z:
            return "Z";
        case GateName::H:
            return "H";
        case GateName::SWAP:
            return "SWAP";
        case GateName::CNOT:
            return "CNOT";
        case GateName::CH:
            return "CH";
    }
    return "?";
}

inline std::string_view to_string(ControlArm arm) { return arm == ControlArm::upper ? "upper" : "lower"; }

inline std::optional<GateName> parse_gate_name(std::string_view s) {
    for (GateName g : {GateName::I, GateName::X, GateName::Z, GateName::H, GateName::SWAP, GateName::CNOT,
                       GateName::CH}) {
        if (s == to_string(g)) {
            return g;
        }
    }
    return std::nullopt;
}

namespace detail {

inline ComplexMatrix single_qubit(GateName name) {
    const double r = 1.0 / std::sqrt(2.0);
    switch (name) {
        case GateName::I:
            return ComplexMatrix::identity(2);
        case GateName::X:
            return ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
        case GateName::Z:
            return ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}});
        case GateName::H:
        case GateName::CH:
            return ComplexMatrix::from_rows({{r, r}, {r, -r}});
        case GateName::CNOT:
            return ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
        case GateName::SWAP:
            break;
    }
    throw std::invalid_argument("single_qubit: no single-qubit form for " + std::string(to_string(name)));
}

inline ComplexMatrix controlled(const ComplexMatrix &target_op, ControlArm control) {
    const ComplexMatrix p0 = ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
    const ComplexMatrix p1 = ComplexMatrix::from_rows({{0.0, 0.0}, {0.0, 1.0}});
    const ComplexMatrix id = ComplexMatrix::identity(2);
    if (control == ControlArm::upper) {
        return tensor_product(p0, id) + tensor_product(p1, target_op);
    }
    return tensor_product(id, p0) + tensor_product(target_op, p1);
}

}  // namespace detail

/// Two-qubit gate on (upper, lower). Single-qubit names act on the upper
/// arm; controlled gates target the arm opposite the control.
inline UnitaryGate standard_gate(GateName name, ControlArm control = ControlArm::lower) {
    std::string label(to_string(name));
    switch (name) {
        case GateName::I:
            return UnitaryGate(ComplexMatrix::identity(4), label);
        case GateName::X:
        case GateName::Z:
        case GateName::H:
            return UnitaryGate(tensor_product(detail::single_qubit(name), ComplexMatrix::identity(2)), label);
        case GateName::SWAP: {
            ComplexMatrix m(4, 4);
            m(0, 0) = 1.0;
            m(1, 2) = 1.0;
            m(2, 1) = 1.0;
            m(3, 3) = 1.0;
            return UnitaryGate(std::move(m), label);
        }
        case GateName::CNOT:
        case GateName::CH:
            label += "(control=" + std::string(to_string(control)) + ")";
            return UnitaryGate(detail::controlled(detail::single_qubit(name), control), label);
    }
    throw std::invalid_argument("standard_gate: unknown gate");
}

inline UnitaryGate standard_gate(std::string_view name, ControlArm control = ControlArm::lower) {
    auto parsed = parse_gate_name(name);
    if (!parsed) {
        throw std::invalid_argument("standard_gate: unknown gate '" + std::string(name) + "'");
    }
    return standard_gate(*parsed, control);
}

enum class BellLabel { phi_plus, phi_minus, psi_plus, psi_minus };

inline std::optional<BellLabel> parse_bell_label(std::string_view s) {
    if (s == "Phi+" || s == "Φ+") return BellLabel::phi_plus;
    if (s == "Phi-" || s == "Φ-") return BellLabel::phi_minus;
    if (s == "Psi+" || s == "Ψ+") return BellLabel::psi_plus;
    if (s == "Psi-" || s == "Ψ-") return BellLabel::psi_minus;
    return std::nullopt;
}

/// Number of qubits described by a ket string, or nullopt if invalid.
inline std::optional<std::size_t> ket_qubit_count(std::string_view spec) {
    if (parse_bell_label(spec)) {
        return 2;
    }
    if (spec.empty()) {
        return std::nullopt;
    }
    for (char c : spec) {
        if (c != '0' && c != '1' && c != '+' && c != '-') {
            return std::nullopt;
        }
    }
    return spec.size();
}

/// State vector for a product ket over {0,1,+,-} or a Bell label.
inline std::vector<Complex> standard_ket(std::string_view spec) {
    const double r = 1.0 / std::sqrt(2.0);
    if (auto bell = parse_bell_label(spec)) {
        switch (*bell) {
            case BellLabel::phi_plus:
                return {r, 0.0, 0.0, r};
            case BellLabel::phi_minus:
                return {r, 0.0, 0.0, -r};
            case BellLabel::psi_plus:
                return {0.0, r, r, 0.0};
            case BellLabel::psi_minus:
                return {0.0, r, -r, 0.0};
        }
    }
    if (spec.empty()) {
        throw std::invalid_argument("standard_ket: empty state spec");
    }
    std::vector<Complex> ket{1.0};
    for (char c : spec) {
        std::vector<Complex> q;
        switch (c) {
            case '0':
                q = {1.0, 0.0};
                break;
            case '1':
                q = {0.0, 1.0};
                break;
            case '+':
                q = {r, r};
                break;
            case '-':
                q = {r, -r};
                break;
            default:
                throw std::invalid_argument("standard_ket: unknown symbol '" + std::string(1, c) + "'");
        }
        ket = tensor_product(ket, q);
    }
    return ket;
}

inline DensityMatrix standard_state(std::string_view spec) { return DensityMatrix::from_pure(standard_ket(spec)); }

}  // namespace ctc
