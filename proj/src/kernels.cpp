#include "contra/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace contra::kernels {

const Ops* avx2_ops_table();
const Ops* neon_ops_table();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* pick_auto() {
    if (const Ops* ops = avx2_ops_table(); ops && cpu_has_avx2()) return ops;
    if (const Ops* ops = neon_ops_table()) return ops;
    return &scalar_ops();
}

const Ops* pick(const char* name) {
    if (std::strcmp(name, "auto") == 0) return pick_auto();
    if (std::strcmp(name, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(name, "avx2") == 0) {
        const Ops* ops = avx2_ops_table();
        if (ops && cpu_has_avx2()) return ops;
        throw std::runtime_error("avx2 kernels unavailable on this machine");
    }
    if (std::strcmp(name, "neon") == 0) {
        if (const Ops* ops = neon_ops_table()) return ops;
        throw std::runtime_error("neon kernels unavailable on this machine");
    }
    throw std::runtime_error(std::string("unknown kernel set: ") + name);
}

std::atomic<const Ops*>& active_slot() {
    static std::atomic<const Ops*> slot{[] {
        if (const char* env = std::getenv("CONTRA_KERNELS")) return pick(env);
        return pick_auto();
    }()};
    return slot;
}

}  // namespace

const Ops* avx2_ops() {
    const Ops* ops = avx2_ops_table();
    return (ops && cpu_has_avx2()) ? ops : nullptr;
}

const Ops* neon_ops() { return neon_ops_table(); }

const Ops& active() { return *active_slot().load(std::memory_order_relaxed); }

void set_active(const char* name) {
    active_slot().store(pick(name), std::memory_order_relaxed);
}

}  // namespace contra::kernels
