#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ctc/numerics.hpp"
#include "test_support.hpp"

using namespace ctc;
using ctc::testing::random_hermitian;
using ctc::testing::random_matrix;

namespace {

// Independent index-formula oracles.
ComplexMatrix kron_by_index(const ComplexMatrix &a, const ComplexMatrix &b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            out(r, c) = a(r / b.rows(), c / b.cols()) * b(r % b.rows(), c % b.cols());
        }
    }
    return out;
}

ComplexMatrix trace_by_summation(const ComplexMatrix &m, std::size_t da, std::size_t db, bool keep_first) {
    const std::size_t d = keep_first ? da : db;
    ComplexMatrix out(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            Complex s{};
            const std::size_t other = keep_first ? db : da;
            for (std::size_t k = 0; k < other; ++k) {
                s += keep_first ? m(i * db + k, j * db + k) : m(k * db + i, k * db + j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

// det(A - x I) by Gaussian elimination with partial pivoting (complex arithmetic).
double char_poly(const ComplexMatrix &a, double x) {
    const std::size_t n = a.rows();
    std::vector<Complex> m(a.entries().begin(), a.entries().end());
    for (std::size_t i = 0; i < n; ++i) {
        m[i * n + i] -= x;
    }
    Complex det{1.0, 0.0};
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) {
                piv = r;
            }
        }
        if (std::abs(m[piv * n + col]) == 0.0) {
            return 0.0;
        }
        if (piv != col) {
            for (std::size_t k = 0; k < n; ++k) {
                std::swap(m[piv * n + k], m[col * n + k]);
            }
            det = -det;
        }
        det *= m[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex f = m[r * n + col] / m[col * n + col];
            for (std::size_t k = col; k < n; ++k) {
                m[r * n + k] -= f * m[col * n + k];
            }
        }
    }
    return det.real();
}

// Roots of the characteristic polynomial: scan for sign changes, then bisect.
std::vector<double> roots_by_bisection(const ComplexMatrix &a) {
    double bound = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            row += std::abs(a(i, j));
        }
        bound = std::max(bound, row);
    }
    bound += 1.0;
    std::vector<double> roots;
    const int cells = 20000;
    double prev_x = -bound;
    double prev_f = char_poly(a, prev_x);
    for (int k = 1; k <= cells; ++k) {
        const double x = -bound + 2.0 * bound * k / cells;
        const double f = char_poly(a, x);
        if ((prev_f < 0.0) != (f < 0.0)) {
            double lo = prev_x;
            double hi = x;
            double flo = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = char_poly(a, mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = f;
    }
    std::sort(roots.rbegin(), roots.rend());
    return roots;
}

}  // namespace

TEST(ComplexMatrix, RejectsBadShapesAndNonFinite) {
    EXPECT_THROW(ComplexMatrix(0, 2), std::invalid_argument);
    EXPECT_THROW(ComplexMatrix(2, 2, std::vector<Complex>(3)), std::invalid_argument);
    EXPECT_THROW(ComplexMatrix(1, 1, {Complex{std::nan(""), 0.0}}), std::invalid_argument);
    EXPECT_THROW(ComplexMatrix(1, 1, {Complex{0.0, INFINITY}}), std::invalid_argument);
}

TEST(TensorProduct, IdentityAndBasisExamples) {
    EXPECT_EQ(tensor_product(ComplexMatrix::identity(2), ComplexMatrix::identity(2)), ComplexMatrix::identity(4));
    const double p0[] = {1.0, 0.0};
    const double p1[] = {0.0, 1.0};
    const double expected[] = {0.0, 1.0, 0.0, 0.0};
    EXPECT_EQ(tensor_product(ComplexMatrix::diagonal(p0), ComplexMatrix::diagonal(p1)), ComplexMatrix::diagonal(expected));
}

TEST(TensorProduct, MatchesIndexFormula) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto a = random_matrix(rng, 2, 2);
        const auto b = random_matrix(rng, 2, 2);
        EXPECT_EQ(tensor_product(a, b), kron_by_index(a, b));
        const auto c = random_matrix(rng, 3, 2);
        const auto d = random_matrix(rng, 2, 4);
        EXPECT_EQ(tensor_product(c, d), kron_by_index(c, d));
    }
}

TEST(TensorProduct, Associative) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 50; ++t) {
        const auto a = random_matrix(rng, 2, 2);
        const auto b = random_matrix(rng, 3, 3);
        const auto c = random_matrix(rng, 2, 2);
        EXPECT_LT(max_abs_diff(tensor_product(tensor_product(a, b), c), tensor_product(a, tensor_product(b, c))), 1e-14);
    }
}

TEST(PartialTrace, ProductAndBellExamples) {
    const double p0[] = {1.0, 0.0};
    const auto zero = ComplexMatrix::diagonal(p0);
    const auto half = ComplexMatrix::identity(2) * 0.5;
    EXPECT_LT(max_abs_diff(partial_trace(tensor_product(zero, half), 2, 2, Keep::first), zero), 1e-15);
    const double r = 1.0 / std::sqrt(2.0);
    const std::vector<Complex> phi{r, 0.0, 0.0, r};
    const auto bell = ComplexMatrix::outer(phi);
    EXPECT_LT(max_abs_diff(partial_trace(bell, 2, 2, Keep::second), half), 1e-15);
    EXPECT_LT(max_abs_diff(partial_trace(bell, 2, 2, Keep::first), half), 1e-15);
}

TEST(PartialTrace, MatchesDoubleIndexSummation) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
        const auto m = random_hermitian(rng, 4);
        EXPECT_LT(max_abs_diff(partial_trace(m, 2, 2, Keep::first), trace_by_summation(m, 2, 2, true)), 1e-14);
        EXPECT_LT(max_abs_diff(partial_trace(m, 2, 2, Keep::second), trace_by_summation(m, 2, 2, false)), 1e-14);
        const auto m6 = random_hermitian(rng, 6);
        EXPECT_LT(max_abs_diff(partial_trace(m6, 3, 2, Keep::first), trace_by_summation(m6, 3, 2, true)), 1e-14);
        EXPECT_LT(max_abs_diff(partial_trace(m6, 3, 2, Keep::second), trace_by_summation(m6, 3, 2, false)), 1e-14);
    }
}

TEST(PartialTrace, ProductFactorizesAndTracePreserved) {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 100; ++t) {
        const auto a = random_matrix(rng, 2, 2);
        const auto b = random_matrix(rng, 3, 3);
        const auto ab = tensor_product(a, b);
        EXPECT_LT(max_abs_diff(partial_trace(ab, 2, 3, Keep::first), a * b.trace()), 1e-13);
        EXPECT_LT(max_abs_diff(partial_trace(ab, 2, 3, Keep::second), b * a.trace()), 1e-13);
        const auto m = random_matrix(rng, 6, 6);
        EXPECT_LT(std::abs(partial_trace(m, 2, 3, Keep::first).trace() - m.trace()), 1e-13);
        EXPECT_LT(std::abs(partial_trace(m, 2, 3, Keep::second).trace() - m.trace()), 1e-13);
    }
    EXPECT_THROW(partial_trace(ComplexMatrix::identity(4), 3, 2, Keep::first), std::invalid_argument);
}

TEST(PartialTrace, MiddleFactor) {
    std::mt19937_64 rng(15);
    const auto a = random_matrix(rng, 2, 2);
    const auto b = random_matrix(rng, 3, 3);
    const auto c = random_matrix(rng, 2, 2);
    const auto abc = tensor_product(tensor_product(a, b), c);
    EXPECT_LT(max_abs_diff(partial_trace_middle(abc, 2, 3, 2), tensor_product(a, c) * b.trace()), 1e-13);
}

TEST(Eigen, KnownSpectra) {
    const double d[] = {0.25, 0.75};
    const auto e = eig_hermitian(ComplexMatrix::diagonal(d));
    EXPECT_DOUBLE_EQ(e.values[0], 0.75);
    EXPECT_DOUBLE_EQ(e.values[1], 0.25);
    const auto x = eig_hermitian(ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}));
    EXPECT_NEAR(x.values[0], 1.0, 1e-15);
    EXPECT_NEAR(x.values[1], -1.0, 1e-15);
    EXPECT_THROW(eig_hermitian(ComplexMatrix(2, 3)), std::invalid_argument);
}

TEST(Eigen, ReconstructsRandomHermitian) {
    std::mt19937_64 rng(16);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
        const auto m = random_hermitian(rng, n);
        const auto e = eig_hermitian(m);
        const auto rebuilt = e.vectors * ComplexMatrix::diagonal(e.values) * e.vectors.adjoint();
        ASSERT_LT(max_abs_diff(rebuilt, m), 1e-10) << "n=" << n;
        ASSERT_LT(max_abs_diff(e.vectors * e.vectors.adjoint(), ComplexMatrix::identity(n)), 1e-10);
        ASSERT_TRUE(std::is_sorted(e.values.rbegin(), e.values.rend()));
    }
}

TEST(Eigen, MatchesCharacteristicPolynomialRoots) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 20; ++t) {
        const auto m = random_hermitian(rng, 4);
        const auto roots = roots_by_bisection(m);
        const auto e = eig_hermitian(m);
        ASSERT_EQ(roots.size(), 4u);
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_NEAR(e.values[k], roots[k], 1e-9);
        }
    }
}

TEST(Entropy, Examples) {
    const std::vector<Complex> ket{1.0 / std::sqrt(2.0), Complex{0.0, 1.0 / std::sqrt(2.0)}};
    EXPECT_NEAR(von_neumann_entropy(ComplexMatrix::outer(ket)), 0.0, 1e-12);
    EXPECT_NEAR(von_neumann_entropy(ComplexMatrix::identity(2) * 0.5), 1.0, 1e-15);
    const double d[] = {0.75, 0.25};
    const double binary = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)) / std::log(2.0);
    EXPECT_NEAR(von_neumann_entropy(ComplexMatrix::diagonal(d)), binary, 1e-14);
    EXPECT_NEAR(binary, 0.811278, 1e-6);
}

TEST(Entropy, RangeAndUnitaryInvariance) {
    Sampler s(Seed{18});
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(t % 3);
        const auto rho = s.density(d);
        const auto u = s.unitary(d);
        const double e = von_neumann_entropy(rho);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, std::log2(static_cast<double>(d)) + 1e-12);
        EXPECT_NEAR(von_neumann_entropy(u * rho * u.adjoint()), e, 1e-10);
    }
}

TEST(Entropy, ClampingBeyondToleranceIsAnError) {
    const double bad[] = {1.1, -0.1};
    EXPECT_THROW(state_spectrum(ComplexMatrix::diagonal(bad)), std::domain_error);
    const double ok[] = {1.0 + 1e-12, -1e-12};
    const auto spec = state_spectrum(ComplexMatrix::diagonal(ok));
    EXPECT_EQ(spec[0], 1.0);
    EXPECT_EQ(spec[1], 0.0);
}

TEST(TraceDistance, Examples) {
    const double p0[] = {1.0, 0.0};
    const double p1[] = {0.0, 1.0};
    const auto zero = ComplexMatrix::diagonal(p0);
    EXPECT_EQ(trace_distance(zero, zero), 0.0);
    EXPECT_NEAR(trace_distance(zero, ComplexMatrix::diagonal(p1)), 1.0, 1e-15);
    const auto plus = ComplexMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
    EXPECT_NEAR(trace_distance(zero, plus), 1.0 / std::sqrt(2.0), 1e-14);
    EXPECT_THROW(trace_distance(zero, ComplexMatrix::identity(3)), std::invalid_argument);
}

TEST(TraceDistance, MetricProperties) {
    Sampler s(Seed{19});
    for (int t = 0; t < 200; ++t) {
        const auto a = s.density(3);
        const auto b = s.density(3);
        const auto c = s.density(3);
        const double ab = trace_distance(a, b);
        EXPECT_NEAR(ab, trace_distance(b, a), 1e-14);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0 + 1e-12);
        EXPECT_LE(trace_distance(a, c), ab + trace_distance(b, c) + 1e-12);
    }
}

TEST(Sampling, DeterministicPerSeed) {
    for (auto kind : {SampleKind::unitary, SampleKind::density, SampleKind::pure}) {
        EXPECT_EQ(sample_random(Seed{42}, kind, 3), sample_random(Seed{42}, kind, 3));
        EXPECT_NE(sample_random(Seed{42}, kind, 3), sample_random(Seed{43}, kind, 3));
    }
    EXPECT_THROW(sample_random(Seed{1}, SampleKind::unitary, 1), std::invalid_argument);
}

TEST(Sampling, OutputsSatisfyInvariants) {
    Sampler s(Seed{20});
    for (int t = 0; t < 500; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(t % 3);
        const auto u = s.unitary(d);
        ASSERT_LT(max_abs_diff(u * u.adjoint(), ComplexMatrix::identity(d)), 1e-12);
        const auto rho = s.density(d);
        ASSERT_LT(max_abs_diff(rho, rho.adjoint()), 1e-14);
        ASSERT_NEAR(rho.trace().real(), 1.0, 1e-14);
        ASSERT_GT(eig_hermitian(rho).values.back(), -1e-12);
        const auto pure = s.pure(d);
        ASSERT_NEAR(von_neumann_entropy(pure), 0.0, 1e-7);
        ASSERT_NEAR(pure.trace().real(), 1.0, 1e-14);
    }
}

TEST(Sampling, HaarFirstMoment) {
    Sampler s(Seed{21});
    double mean = 0.0;
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
        mean += std::norm(s.unitary(2)(0, 0));
    }
    mean /= n;
    EXPECT_NEAR(mean, 0.5, 0.02);
}
