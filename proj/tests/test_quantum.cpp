#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ctc/quantum.hpp"
#include "test_support.hpp"

using namespace ctc;

namespace {

const double kR = 1.0 / std::sqrt(2.0);

std::vector<Complex> act(const ComplexMatrix &m, const std::vector<Complex> &v) { return m * std::span<const Complex>(v); }

double max_diff(const std::vector<Complex> &a, const std::vector<Complex> &b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

}  // namespace

TEST(DensityMatrix, ValidatesInvariants) {
    EXPECT_THROW(DensityMatrix(ComplexMatrix::from_rows({{1.0, 0.5}, {0.0, 0.0}})), std::invalid_argument);
    EXPECT_THROW(DensityMatrix(ComplexMatrix::from_rows({{0.6, 0.0}, {0.0, 0.6}})), std::invalid_argument);
    EXPECT_THROW(DensityMatrix(ComplexMatrix::from_rows({{1.1, 0.0}, {0.0, -0.1}})), std::invalid_argument);
    EXPECT_THROW(DensityMatrix(ComplexMatrix(2, 3)), std::invalid_argument);
    EXPECT_NO_THROW(DensityMatrix(ComplexMatrix::identity(3) * (1.0 / 3.0)));
    EXPECT_THROW(DensityMatrix::from_pure(std::vector<Complex>{1.0, 1.0}), std::invalid_argument);
}

TEST(UnitaryGate, ValidatesUnitarity) {
    EXPECT_THROW(UnitaryGate(ComplexMatrix::from_rows({{1.0, 1.0}, {0.0, 1.0}}), "shear"), std::invalid_argument);
    EXPECT_NO_THROW(UnitaryGate(ComplexMatrix::identity(4), "id"));
}

TEST(StandardGate, SwapExchangesBasisStates) {
    const auto swap = standard_gate(GateName::SWAP).matrix();
    const std::vector<Complex> unnormalized{1.0, 1.0};
    EXPECT_THROW(DensityMatrix::from_pure(unnormalized), std::invalid_argument);
}

TEST(StandardGate, SwapExchangesFactors) {
    Sampler s(Seed{5});
    const auto swap = standard_gate(GateName::SWAP).matrix();
    for (int t = 0; t < 50; ++t) {
        const auto a = s.density(2);
        const auto b = s.density(2);
        EXPECT_LT(max_abs_diff(swap * tensor_product(a, b) * swap, tensor_product(b, a)), 1e-14);
    }
}

TEST(StandardGate, ControlledHadamardOrientation) {
    const auto ch = standard_gate(GateName::CH, ControlArm::lower).matrix();
    // Control off: any upper state passes unchanged.
    Sampler s(Seed{6});
    for (int t = 0; t < 10; ++t) {
        const auto phi = s.pure_vector(2);
        const auto in = tensor_product(std::span<const Complex>(phi), std::span<const Complex>(standard_ket("0")));
        EXPECT_LT(max_diff(act(ch, in), in), 1e-15);
    }
    EXPECT_LT(max_diff(act(ch, standard_ket("01")), standard_ket("+1")), 1e-15);

    // Explicit 4x4 oracle in the (upper, lower) basis 00, 01, 10, 11.
    const auto oracle = ComplexMatrix::from_rows(
        {{1.0, 0.0, 0.0, 0.0}, {0.0, kR, 0.0, kR}, {0.0, 0.0, 1.0, 0.0}, {0.0, kR, 0.0, -kR}});
    EXPECT_LT(max_abs_diff(ch, oracle), 1e-15);

    const auto ch_upper = standard_gate(GateName::CH, ControlArm::upper).matrix();
    EXPECT_LT(max_diff(act(ch_upper, standard_ket("10")), standard_ket("1+")), 1e-15);
    EXPECT_LT(max_diff(act(ch_upper, standard_ket("01")), standard_ket("01")), 1e-15);
}

TEST(StandardGate, SingleQubitNamesActOnUpperArm) {
    const auto x = standard_gate(GateName::X).matrix();
    EXPECT_LT(max_diff(act(x, standard_ket("01")), standard_ket("11")), 1e-15);
    const auto cnot = standard_gate(GateName::CNOT, ControlArm::upper).matrix();
    EXPECT_LT(max_diff(act(cnot, standard_ket("10")), standard_ket("11")), 1e-15);
    EXPECT_EQ(standard_gate(GateName::CH).label(), "CH(control=lower)");
    EXPECT_THROW(standard_gate("Toffoli"), std::invalid_argument);
}

TEST(StandardState, Examples) {
    const auto zero = standard_state("0");
    EXPECT_LT(max_abs_diff(zero.matrix(), ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, 0.0}})), 1e-15);
    const auto minus = standard_state("-");
    EXPECT_LT(max_abs_diff(minus.matrix(), ComplexMatrix::from_rows({{0.5, -0.5}, {-0.5, 0.5}})), 1e-15);
    for (const char *label : {"Phi+", "Φ+"}) {
        const auto bell = standard_state(label);
        const std::vector<Complex> phi{kR, 0.0, 0.0, kR};
        EXPECT_LT(max_abs_diff(bell.matrix(), ComplexMatrix::outer(phi)), 1e-15);
    }
    EXPECT_THROW(standard_state(""), std::invalid_argument);
    EXPECT_THROW(standard_state("0x"), std::invalid_argument);
    EXPECT_EQ(ket_qubit_count("0+-1"), 4u);
    EXPECT_EQ(ket_qubit_count("Psi-"), 2u);
    EXPECT_FALSE(ket_qubit_count("2"));
}

TEST(Depolarize, Examples) {
    Sampler s(Seed{7});
    const DensityMatrix rho(s.density(2));
    EXPECT_EQ(depolarize(rho, 0.0).matrix(), rho.matrix());
    EXPECT_LT(max_abs_diff(depolarize(rho, 1.0).matrix(), ComplexMatrix::identity(2) * 0.5), 1e-16);
    const double expected[] = {0.95, 0.05};
    EXPECT_LT(max_abs_diff(depolarize(standard_state("0"), 0.1).matrix(), ComplexMatrix::diagonal(expected)), 1e-15);
    EXPECT_THROW(depolarize(rho, -0.1), std::invalid_argument);
    EXPECT_THROW(depolarize(rho, 1.5), std::invalid_argument);
}

TEST(Depolarize, AffineInState) {
    Sampler s(Seed{8});
    for (int t = 0; t < 100; ++t) {
        const auto a = s.density(3);
        const auto b = s.density(3);
        const double lambda = 0.37;
        const double p = 0.01 * t;
        const auto mix = a * lambda + b * (1.0 - lambda);
        const auto lhs = depolarize(mix, p);
        const auto rhs = depolarize(a, p) * lambda + depolarize(b, p) * (1.0 - lambda);
        EXPECT_LT(max_abs_diff(lhs, rhs), 1e-13);
    }
}

TEST(KrausChannel, CompletenessAndExamples) {
    EXPECT_THROW(KrausChannel({ComplexMatrix::identity(2) * 0.9}), std::invalid_argument);
    EXPECT_THROW(KrausChannel({}), std::invalid_argument);

    Sampler s(Seed{9});
    const DensityMatrix rho(s.density(2));
    const KrausChannel id({ComplexMatrix::identity(2)});
    EXPECT_LT(max_abs_diff(apply_channel(id, rho).matrix(), rho.matrix()), 1e-15);

    const KrausChannel reset({ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, 0.0}}),
                              ComplexMatrix::from_rows({{0.0, 1.0}, {0.0, 0.0}})});
    for (int t = 0; t < 20; ++t) {
        EXPECT_LT(max_abs_diff(apply_channel(reset, DensityMatrix(s.density(2))).matrix(), standard_state("0").matrix()),
                  1e-14);
    }
}

TEST(KrausChannel, PauliChannelIsDepolarizer) {
    const auto x = ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    const auto y = ComplexMatrix::from_rows({{0.0, Complex{0.0, -1.0}}, {Complex{0.0, 1.0}, 0.0}});
    const auto z = ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}});
    Sampler s(Seed{10});
    for (double p : {0.0, 0.05, 0.3, 0.75}) {
        const double a = std::sqrt(1.0 - p);
        const double b = std::sqrt(p / 3.0);
        const KrausChannel pauli({ComplexMatrix::identity(2) * a, x * b, y * b, z * b});
        for (int t = 0; t < 20; ++t) {
            const DensityMatrix rho(s.density(2));
            EXPECT_LT(max_abs_diff(apply_channel(pauli, rho).matrix(), depolarize(rho, 4.0 * p / 3.0).matrix()), 1e-14);
        }
    }
}

TEST(KrausChannel, PreservesTraceAndPositivity) {
    Sampler s(Seed{11});
    for (int t = 0; t < 100; ++t) {
        // Stinespring: E_k = (<k| (x) I) U (I (x) |0>) for a random 4x4 U on (env, system).
        const auto u = s.unitary(4);
        std::vector<ComplexMatrix> ops;
        for (std::size_t k = 0; k < 2; ++k) {
            ComplexMatrix e(2, 2);
            for (std::size_t i = 0; i < 2; ++i) {
                for (std::size_t j = 0; j < 2; ++j) {
                    e(i, j) = u(k * 2 + i, j);
                }
            }
            ops.push_back(e);
        }
        const KrausChannel ch(ops);
        const auto out = apply_channel(ch, DensityMatrix(s.density(2)));
        EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-12);
        EXPECT_GT(eig_hermitian(out.matrix()).values.back(), -1e-9);
    }
}
