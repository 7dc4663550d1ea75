#include "contra/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "contra/kernels.hpp"

namespace contra {

bool cholesky_in_place(Matrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("cholesky: matrix not square");
    const std::size_t n = m.rows;
    const auto& k = kernels::active();
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j) - k.sumsq(m.row(j), j);
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        m(j, j) = d;
        const double inv = 1.0 / d;
        for (std::size_t i = j + 1; i < n; ++i)
            m(i, j) = (m(i, j) - k.dot(m.row(i), m.row(j), j)) * inv;
    }
    return true;
}

void cholesky_solve(const Matrix& l, const double* b, double* x) {
    const std::size_t n = l.rows;
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < n; ++i)
        x[i] = (b[i] - k.dot(l.row(i), x, i)) / l(i, i);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
        x[ii] = s / l(ii, ii);
    }
}

void forward_substitute(const Matrix& l, const double* b, double* y) {
    const std::size_t n = l.rows;
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = (b[i] - k.dot(l.row(i), y, i)) / l(i, i);
}

double cholesky_log_det(const Matrix& l) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows; ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

SymEig2 sym_eig_2x2(double a, double b, double c) {
    SymEig2 out;
    const double tr = a + c;
    const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    out.eigval[0] = 0.5 * tr + disc;
    out.eigval[1] = 0.5 * tr - disc;
    if (std::fabs(b) < 1e-300) {
        if (a >= c) {
            out.eigvec[0][0] = 1.0; out.eigvec[0][1] = 0.0;
            out.eigvec[1][0] = 0.0; out.eigvec[1][1] = 1.0;
        } else {
            out.eigvec[0][0] = 0.0; out.eigvec[0][1] = 1.0;
            out.eigvec[1][0] = 1.0; out.eigvec[1][1] = 0.0;
        }
        return out;
    }
    for (int i = 0; i < 2; ++i) {
        double vx = out.eigval[i] - c;
        double vy = b;
        const double norm = std::hypot(vx, vy);
        out.eigvec[i][0] = vx / norm;
        out.eigvec[i][1] = vy / norm;
    }
    return out;
}

}  // namespace contra
