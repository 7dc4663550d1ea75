#pragma once

#include <cstddef>
#include <vector>

namespace contra {

// Dense row-major matrix; sized for the small systems in this project
// (conditioner layers, kernel-ridge Gram matrices, q x q covariances).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
};

// In-place Cholesky factorization A = L L^T (lower triangle of `a` holds L on
// success; upper triangle is left untouched). Returns false if A is not
// positive definite.
bool cholesky_in_place(Matrix& a);

// Solves L y = b, then L^T x = y for a factor produced by cholesky_in_place.
void cholesky_solve(const Matrix& l, const double* b, double* x);

// Forward substitution only: y = L^{-1} b. ||y||^2 is the Mahalanobis
// quadratic form b^T (L L^T)^{-1} b.
void forward_substitute(const Matrix& l, const double* b, double* y);

// log(det(L L^T)) = 2 sum log L_ii.
double cholesky_log_det(const Matrix& l);

struct SymEig2 {
    double eigval[2];
    double eigvec[2][2];  // eigvec[i] is the unit eigenvector for eigval[i]
};

// Closed-form eigendecomposition of [[a, b], [b, c]].
SymEig2 sym_eig_2x2(double a, double b, double c);

}  // namespace contra
