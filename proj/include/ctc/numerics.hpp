#pragma once

// Dense complex linear algebra for the small Hilbert spaces used by the
// simulator. Storage is row-major; the first tensor factor is always the
// most significant index.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctc {

using Complex = std::complex<double>;

class ComplexMatrix {
  public:
    ComplexMatrix() = default;

    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), entries_(rows * cols, Complex{0.0, 0.0}) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("ComplexMatrix: dimensions must be positive");
        }
    }

    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("ComplexMatrix: dimensions must be positive");
        }
        if (entries_.size() != rows * cols) {
            throw std::invalid_argument("ComplexMatrix: entry count " + std::to_string(entries_.size()) +
                                        " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        for (const auto &z : entries_) {
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
                throw std::invalid_argument("ComplexMatrix: non-finite entry");
            }
        }
    }

    static ComplexMatrix from_rows(std::initializer_list<std::initializer_list<Complex>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<Complex> entries;
        entries.reserve(r * c);
        for (const auto &row : rows) {
            if (row.size() != c) {
                throw std::invalid_argument("ComplexMatrix::from_rows: ragged rows");
            }
            entries.insert(entries.end(), row.begin(), row.end());
        }
        return ComplexMatrix(r, c, std::move(entries));
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    static ComplexMatrix diagonal(std::span<const double> values) {
        ComplexMatrix m(values.size(), values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            m(i, i) = values[i];
        }
        return m;
    }

    /// |v><v| for a column vector v.
    static ComplexMatrix outer(std::span<const Complex> v) {
        ComplexMatrix m(v.size(), v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            for (std::size_t j = 0; j < v.size(); ++j) {
                m(i, j) = v[i] * std::conj(v[j]);
            }
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }
    bool empty() const { return entries_.empty(); }

    Complex &operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    const Complex &operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    std::span<const Complex> entries() const { return entries_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                out(j, i) = std::conj((*this)(i, j));
            }
        }
        return out;
    }

    Complex trace() const {
        require_square("trace");
        Complex t{0.0, 0.0};
        for (std::size_t i = 0; i < rows_; ++i) {
            t += (*this)(i, i);
        }
        return t;
    }

    /// (m + m^dagger) / 2
    ComplexMatrix hermitian_part() const {
        require_square("hermitian_part");
        ComplexMatrix out(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                out(i, j) = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
            }
        }
        return out;
    }

    double max_abs() const {
        double best = 0.0;
        for (const auto &z : entries_) {
            best = std::max(best, std::abs(z));
        }
        return best;
    }

    ComplexMatrix &operator+=(const ComplexMatrix &other) {
        require_same_shape(other, "+=");
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            entries_[k] += other.entries_[k];
        }
        return *this;
    }

    ComplexMatrix &operator-=(const ComplexMatrix &other) {
        require_same_shape(other, "-=");
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            entries_[k] -= other.entries_[k];
        }
        return *this;
    }

    ComplexMatrix &operator*=(Complex s) {
        for (auto &z : entries_) {
            z *= s;
        }
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= Complex{s, 0.0}; }

    friend ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b) {
        if (a.cols_ != b.rows_) {
            throw std::invalid_argument("ComplexMatrix: product of " + a.shape() + " and " + b.shape());
        }
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex{0.0, 0.0}) {
                    continue;
                }
                for (std::size_t j = 0; j < b.cols_; ++j) {
                    out(i, j) += aik * b(k, j);
                }
            }
        }
        return out;
    }

    friend std::vector<Complex> operator*(const ComplexMatrix &a, std::span<const Complex> v) {
        if (a.cols_ != v.size()) {
            throw std::invalid_argument("ComplexMatrix: matrix-vector dimension mismatch");
        }
        std::vector<Complex> out(a.rows_, Complex{0.0, 0.0});
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t j = 0; j < a.cols_; ++j) {
                out[i] += a(i, j) * v[j];
            }
        }
        return out;
    }

    friend bool operator==(const ComplexMatrix &a, const ComplexMatrix &b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
    }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  private:
    void require_square(const char *what) const {
        if (!is_square()) {
            throw std::invalid_argument(std::string("ComplexMatrix::") + what + ": matrix is " + shape());
        }
    }
    void require_same_shape(const ComplexMatrix &other, const char *what) const {
        if (rows_ != other.rows_ || cols_ != other.cols_) {
            throw std::invalid_argument(std::string("ComplexMatrix ") + what + ": shape " + shape() + " vs " +
                                        other.shape());
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> entries_;
};

/// max |a - b| over entries.
inline double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b) { return (a - b).max_abs(); }

/// Kronecker product: (a (x) b)[i*rb + k, j*cb + l] = a[i,j] * b[k,l].
inline ComplexMatrix tensor_product(const ComplexMatrix &a, const ComplexMatrix &b) {
    const std::size_t rb = b.rows();
    const std::size_t cb = b.cols();
    ComplexMatrix out(a.rows() * rb, a.cols() * cb);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const Complex aij = a(i, j);
            for (std::size_t k = 0; k < rb; ++k) {
                for (std::size_t l = 0; l < cb; ++l) {
                    out(i * rb + k, j * cb + l) = aij * b(k, l);
                }
            }
        }
    }
    return out;
}

inline std::vector<Complex> tensor_product(std::span<const Complex> a, std::span<const Complex> b) {
    std::vector<Complex> out;
    out.reserve(a.size() * b.size());
    for (const auto &x : a) {
        for (const auto &y : b) {
            out.push_back(x * y);
        }
    }
    return out;
}

/// Which factor of a bipartite space survives a partial trace.
enum class Keep { first, second };

/// Reduces an operator on a (dim_a x dim_b) space to one factor.
inline ComplexMatrix partial_trace(const ComplexMatrix &m, std::size_t dim_a, std::size_t dim_b, Keep keep) {
    if (dim_a == 0 || dim_b == 0 || !m.is_square() || m.rows() != dim_a * dim_b) {
        throw std::invalid_argument("partial_trace: matrix " + m.shape() + " is not " + std::to_string(dim_a) + "*" +
                                    std::to_string(dim_b) + " square");
    }
    if (keep == Keep::first) {
        ComplexMatrix out(dim_a, dim_a);
        for (std::size_t i = 0; i < dim_a; ++i) {
            for (std::size_t j = 0; j < dim_a; ++j) {
                Complex s{0.0, 0.0};
                for (std::size_t k = 0; k < dim_b; ++k) {
                    s += m(i * dim_b + k, j * dim_b + k);
                }
                out(i, j) = s;
            }
        }
        return out;
    }
    ComplexMatrix out(dim_b, dim_b);
    for (std::size_t k = 0; k < dim_b; ++k) {
        for (std::size_t l = 0; l < dim_b; ++l) {
            Complex s{0.0, 0.0};
            for (std::size_t i = 0; i < dim_a; ++i) {
                s += m(i * dim_b + k, i * dim_b + l);
            }
            out(k, l) = s;
        }
    }
    return out;
}

/// Traces out the middle factor of a (dim_a x dim_b x dim_c) operator, keeping (a, c).
inline ComplexMatrix partial_trace_middle(const ComplexMatrix &m, std::size_t dim_a, std::size_t dim_b,
                                          std::size_t dim_c) {
    const std::size_t n = dim_a * dim_b * dim_c;
    if (n == 0 || !m.is_square() || m.rows() != n) {
        throw std::invalid_argument("partial_trace_middle: matrix " + m.shape() + " does not match factor dimensions");
    }
    ComplexMatrix out(dim_a * dim_c, dim_a * dim_c);
    for (std::size_t i = 0; i < dim_a; ++i) {
        for (std::size_t k = 0; k < dim_c; ++k) {
            for (std::size_t j = 0; j < dim_a; ++j) {
                for (std::size_t l = 0; l < dim_c; ++l) {
                    Complex s{0.0, 0.0};
                    for (std::size_t b = 0; b < dim_b; ++b) {
                        s += m((i * dim_b + b) * dim_c + k, (j * dim_b + b) * dim_c + l);
                    }
                    out(i * dim_c + k, j * dim_c + l) = s;
                }
            }
        }
    }
    return out;
}

struct EigenDecomposition {
    std::vector<double> values;   // descending
    ComplexMatrix vectors;        // columns are eigenvectors
};

/// Cyclic Jacobi eigensolver for Hermitian matrices. The input is
/// symmetrized as (m + m^dagger)/2 first.
inline EigenDecomposition eig_hermitian(const ComplexMatrix &m) {
    if (!m.is_square()) {
        throw std::invalid_argument("eig_hermitian: matrix is " + m.shape());
    }
    const std::size_t n = m.rows();
    ComplexMatrix a = m.hermitian_part();
    ComplexMatrix v = ComplexMatrix::identity(n);

    double scale = 0.0;
    for (const auto &z : a.entries()) {
        scale += std::norm(z);
    }
    scale = std::max(1.0, std::sqrt(scale));
    const double off_tol = 1e-13 * scale;

    auto off_diagonal_mass = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    s += std::norm(a(i, j));
                }
            }
        }
        return std::sqrt(s);
    };

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_mass() > off_tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double mag = std::abs(apq);
                if (mag < 1e-300) {
                    continue;
                }
                // Phase-rotate the pair so a(p,q) is real, then apply a real rotation.
                const Complex phase = apq / mag;
                const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const Complex conj_phase = std::conj(phase);

                for (std::size_t k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = c * akp - s * conj_phase * akq;
                    a(k, q) = s * akp + c * conj_phase * akq;
                    const Complex vkp = v(k, p);
                    const Complex vkq = v(k, q);
                    v(k, p) = c * vkp - s * conj_phase * vkq;
                    v(k, q) = s * vkp + c * conj_phase * vkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = c * apk - s * phase * aqk;
                    a(q, k) = s * apk + c * phase * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x).real() > a(y, y).real(); });

    EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t col = 0; col < n; ++col) {
        out.values[col] = a(order[col], order[col]).real();
        for (std::size_t row = 0; row < n; ++row) {
            out.vectors(row, col) = v(row, order[col]);
        }
    }
    return out;
}

/// Eigenvalues of a (near-)density operator, clamped into [0, 1].
/// Clamping by more than 1e-8 means the input was not a state.
inline std::vector<double> state_spectrum(const ComplexMatrix &rho) {
    constexpr double kClampLimit = 1e-8;
    std::vector<double> values = eig_hermitian(rho).values;
    for (auto &x : values) {
        if (x < -kClampLimit || x > 1.0 + kClampLimit) {
            throw std::domain_error("state_spectrum: eigenvalue " + std::to_string(x) + " outside [0, 1]");
        }
        x = std::clamp(x, 0.0, 1.0);
    }
    return values;
}

/// Shannon entropy in bits of a probability vector, with 0 log 0 = 0.
inline double entropy_bits(std::span<const double> probabilities) {
    double s = 0.0;
    for (double x : probabilities) {
        if (x > 0.0) {
            s -= x * std::log2(x);
        }
    }
    return std::max(0.0, s);
}

/// -sum lambda log2 lambda over the spectrum of rho.
inline double von_neumann_entropy(const ComplexMatrix &rho) {
    const auto spectrum = state_spectrum(rho);
    return entropy_bits(spectrum);
}

/// (1/2) sum |lambda_i(a - b)|.
inline double trace_distance(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("trace_distance: shape " + a.shape() + " vs " + b.shape());
    }
    const auto eig = eig_hermitian(a - b);
    double s = 0.0;
    for (double x : eig.values) {
        s += std::abs(x);
    }
    return 0.5 * s;
}

struct Seed {
    std::uint64_t value = 0;
};

enum class SampleKind { unitary, density, pure };

namespace detail {

inline ComplexMatrix gaussian_matrix(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Complex> entries(rows * cols);
    for (auto &z : entries) {
        const double re = normal(rng);
        const double im = normal(rng);
        z = Complex{re, im};
    }
    return ComplexMatrix(rows, cols, std::move(entries));
}

/// Modified Gram-Schmidt with one reorthogonalization pass. The implied
/// R factor has a positive real diagonal, which makes the Q of a complex
/// Gaussian matrix Haar distributed.
inline ComplexMatrix orthonormalize_columns(ComplexMatrix m) {
    const std::size_t n = m.rows();
    for (std::size_t col = 0; col < m.cols(); ++col) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t prev = 0; prev < col; ++prev) {
                Complex dot{0.0, 0.0};
                for (std::size_t r = 0; r < n; ++r) {
                    dot += std::conj(m(r, prev)) * m(r, col);
                }
                for (std::size_t r = 0; r < n; ++r) {
                    m(r, col) -= dot * m(r, prev);
                }
            }
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            norm += std::norm(m(r, col));
        }
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < n; ++r) {
            m(r, col) /= norm;
        }
    }
    return m;
}

}  // namespace detail

/// Seeded random sampler. One engine instance yields a reproducible stream.
class Sampler {
  public:
    explicit Sampler(Seed seed) : rng_(seed.value) {}

    ComplexMatrix unitary(std::size_t dim) {
        require_dim(dim);
        return detail::orthonormalize_columns(detail::gaussian_matrix(rng_, dim, dim));
    }

    ComplexMatrix density(std::size_t dim) {
        require_dim(dim);
        ComplexMatrix a = detail::gaussian_matrix(rng_, dim, dim);
        ComplexMatrix rho = (a * a.adjoint()).hermitian_part();
        const double tr = rho.trace().real();
        rho *= Complex{1.0 / tr, 0.0};
        return rho;
    }

    std::vector<Complex> pure_vector(std::size_t dim) {
        require_dim(dim);
        ComplexMatrix g = detail::gaussian_matrix(rng_, dim, 1);
        std::vector<Complex> v(g.entries().begin(), g.entries().end());
        double norm = 0.0;
        for (const auto &z : v) {
            norm += std::norm(z);
        }
        norm = std::sqrt(norm);
        for (auto &z : v) {
            z /= norm;
        }
        return v;
    }

    ComplexMatrix pure(std::size_t dim) { return ComplexMatrix::outer(pure_vector(dim)); }

    ComplexMatrix sample(SampleKind kind, std::size_t dim) {
        switch (kind) {
            case SampleKind::unitary:
                return unitary(dim);
            case SampleKind::density:
                return density(dim);
            case SampleKind::pure:
                return pure(dim);
        }
        throw std::invalid_argument("Sampler: unknown kind");
    }

    std::mt19937_64 &engine() { return rng_; }

  private:
    static void require_dim(std::size_t dim) {
        if (dim < 2) {
            throw std::invalid_argument("Sampler: dimension must be at least 2");
        }
    }

    std::mt19937_64 rng_;
};

/// One-shot sample: the same seed always returns the same matrix.
inline ComplexMatrix sample_random(Seed seed, SampleKind kind, std::size_t dim) {
    Sampler sampler(seed);
    return sampler.sample(kind, dim);
}

}  // namespace ctc
