#pragma once

#include <cstddef>

// Data-parallel inner loops used by the dense-net and optimizer code paths.
// A scalar reference implementation always exists; AVX2 (x86-64) and NEON
// (aarch64) variants are selected at runtime and equivalence-tested against
// the reference. Selection can be forced with set_active() or the
// CONTRA_KERNELS environment variable ("scalar", "avx2", "neon", "auto").

namespace contra::kernels {

struct Ops {
    const char* name;

    // out = W x + bias, W row-major rows x cols, bias may be null.
    void (*matvec)(const double* w, const double* x, const double* bias,
                   double* out, std::size_t rows, std::size_t cols);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sumsq)(const double* a, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x *= a
    void (*scal)(double a, double* x, std::size_t n);
    void (*relu)(double* v, std::size_t n);
    // grad[i] = pre[i] > 0 ? grad[i] : 0   (rectifier subgradient at 0 is 0)
    void (*relu_backward)(const double* pre, double* grad, std::size_t n);
    // In-place Adam step with precomputed bias corrections bc1 = 1 - b1^t,
    // bc2 = 1 - b2^t:
    //   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
    //   p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
    void (*adam_update)(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double bc1, double bc2);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // null when not compiled in or unsupported by the CPU
const Ops* neon_ops();

// Runtime-selected table. Stable for the whole process unless set_active()
// is called (tests use it to force the scalar path).
const Ops& active();
// name: "scalar", "avx2", "neon" or "auto"; throws on unknown/unavailable.
void set_active(const char* name);

}  // namespace contra::kernels
