#pragma once

#include <gtest/gtest.h>

#include <random>

#include "ctc/numerics.hpp"
#include "ctc/quantum.hpp"

namespace ctc::testing {

inline ComplexMatrix random_matrix(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> g(0.0, 1.0);
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, j) = Complex{g(rng), g(rng)};
        }
    }
    return m;
}

inline ComplexMatrix random_hermitian(std::mt19937_64 &rng, std::size_t n) { return random_matrix(rng, n, n).hermitian_part(); }

inline DensityMatrix random_state(Sampler &s, std::size_t d) { return DensityMatrix(s.density(d)); }

inline UnitaryGate random_gate(Sampler &s, std::size_t d = 4) { return UnitaryGate(s.unitary(d), "haar"); }

}  // namespace ctc::testing
