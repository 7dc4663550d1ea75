#include "contra/kernels.hpp"

// NEON variants for aarch64, where NEON is a baseline feature.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

namespace contra::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + 2 <= n; i += 2)
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    float64x2_t acc = vaddq_f64(acc0, acc1);
    double out = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) out += a[i] * b[i];
    return out;
}

void matvec(const double* w, const double* x, const double* bias, double* out,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = dot(w + r * cols, x, cols);
        out[r] = bias ? d + bias[r] : d;
    }
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void relu(double* v, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(v + i, vmaxq_f64(zero, vld1q_f64(v + i)));
    for (; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_backward(const double* pre, double* grad, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(pre + i), zero);
        const float64x2_t g = vld1q_f64(grad + i);
        vst1q_f64(grad + i,
                  vreinterpretq_f64_u64(vandq_u64(mask, vreinterpretq_u64_f64(g))));
    }
    for (; i < n; ++i)
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
}

void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
    const float64x2_t vb1 = vdupq_n_f64(b1);
    const float64x2_t vb2 = vdupq_n_f64(b2);
    const float64x2_t vc1 = vdupq_n_f64(1.0 - b1);
    const float64x2_t vc2 = vdupq_n_f64(1.0 - b2);
    const float64x2_t vlr = vdupq_n_f64(lr);
    const float64x2_t veps = vdupq_n_f64(eps);
    const float64x2_t ibc1 = vdupq_n_f64(1.0 / bc1);
    const float64x2_t ibc2 = vdupq_n_f64(1.0 / bc2);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vg = vld1q_f64(g + i);
        float64x2_t vm = vfmaq_f64(vmulq_f64(vc1, vg), vb1, vld1q_f64(m + i));
        float64x2_t vv = vfmaq_f64(vmulq_f64(vc2, vmulq_f64(vg, vg)), vb2, vld1q_f64(v + i));
        vst1q_f64(m + i, vm);
        vst1q_f64(v + i, vv);
        const float64x2_t mhat = vmulq_f64(vm, ibc1);
        const float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_f64(vv, ibc2)), veps);
        float64x2_t vp = vld1q_f64(p + i);
        vp = vsubq_f64(vp, vdivq_f64(vmulq_f64(vlr, mhat), denom));
        vst1q_f64(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

const Ops* neon_ops_table() {
    static const Ops ops = {"neon",  matvec,       dot,  sumsq,
                            axpy,    scal,         relu, relu_backward,
                            adam_update};
    return &ops;
}

}  // namespace contra::kernels

#else

namespace contra::kernels {
const Ops* neon_ops_table() { return nullptr; }
}  // namespace contra::kernels

#endif
