#pragma once

#include <predq/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace predq {

/// Sparse row storage: rows[i] holds (column, value) pairs.
template <class S>
using SparseRows = std::vector<std::vector<std::pair<std::size_t, S>>>;

struct SolverOptions {
    std::size_t direct_limit = 2000;  // float systems above this size are solved iteratively
    double tolerance = 1e-12;
    std::size_t max_iterations = 1'000'000;
};

template <class S>
class DenseMatrix {
   public:
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, S(0)) {}

    S& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    S const& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t j = 0; j < cols_; ++j) std::swap(data_[a * cols_ + j], data_[b * cols_ + j]);
    }

   private:
    std::size_t rows_, cols_;
    std::vector<S> data_;
};

/// Gaussian elimination on a square system. Exact scalars pivot on the first
/// nonzero entry, floats on the largest magnitude. Throws std::domain_error
/// if the matrix is singular.
template <class S>
std::vector<S> solve_dense(DenseMatrix<S> a, std::vector<S> b) {
    std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_dense: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = n;
        if constexpr (is_exact_v<S>) {
            for (std::size_t r = col; r < n; ++r)
                if (a(r, col) != 0) {
                    pivot = r;
                    break;
                }
        } else {
            double best = 0.0;
            for (std::size_t r = col; r < n; ++r)
                if (std::abs(a(r, col)) > best) {
                    best = std::abs(a(r, col));
                    pivot = r;
                }
        }
        if (pivot == n) throw std::domain_error("singular linear system");
        a.swap_rows(col, pivot);
        std::swap(b[col], b[pivot]);
        S inv = S(1) / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            if (a(r, col) == 0) continue;
            S factor = a(r, col) * inv;
            for (std::size_t j = col; j < n; ++j) {
                if (a(col, j) != 0) a(r, j) -= factor * a(col, j);
            }
            b[r] -= factor * b[col];
        }
    }
    std::vector<S> x(n, S(0));
    for (std::size_t i = n; i-- > 0;) {
        S acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j)
            if (a(i, j) != 0) acc -= a(i, j) * x[j];
        x[i] = acc / a(i, i);
    }
    return x;
}

/// Solves x = b + Q x for a substochastic Q whose powers vanish, i.e.
/// (I - Q) x = b. Exact scalars and small systems use elimination; larger
/// float systems use Jacobi sweeps until the update is below tolerance.
template <class S>
std::vector<S> solve_fixed_point(SparseRows<S> const& q, std::vector<S> const& b, SolverOptions const& opt = {}) {
    std::size_t n = b.size();
    if (q.size() != n) throw std::invalid_argument("solve_fixed_point: shape mismatch");
    if (n == 0) return {};
    auto direct = [&] {
        DenseMatrix<S> a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            a(i, i) = S(1);
            for (auto const& [j, v] : q[i]) a(i, j) -= v;
        }
        return solve_dense(std::move(a), b);
    };
    if constexpr (is_exact_v<S>) {
        return direct();
    } else {
        if (n <= opt.direct_limit) return direct();
        std::vector<S> x(b), next(n);
        for (std::size_t it = 0; it < opt.max_iterations; ++it) {
            S delta = 0;
            for (std::size_t i = 0; i < n; ++i) {
                S acc = b[i];
                for (auto const& [j, v] : q[i]) acc += v * x[j];
                next[i] = acc;
                delta = std::max(delta, std::abs(acc - x[i]));
            }
            x.swap(next);
            if (delta <= opt.tolerance) return x;
        }
        throw std::runtime_error("iterative solver did not converge");
    }
}

}  // namespace predq
