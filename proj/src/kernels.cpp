#include "tpad/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpad::kernels {

namespace {
std::atomic<Exec> g_exec{Exec::openmp};

// Rows below this many multiply-adds are not worth a parallel region.
constexpr int64_t kParallelGrain = 1 << 14;
} // namespace

Exec execution() { return g_exec.load(std::memory_order_relaxed); }
void set_execution(Exec mode) { g_exec.store(mode, std::memory_order_relaxed); }

void matmul_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
    for (int64_t i = 0; i < n; ++i) {
        double* ci = c + i * k;
        for (int64_t j = 0; j < k; ++j) ci[j] = 0.0;
        const double* ai = a + i * m;
        for (int64_t l = 0; l < m; ++l) {
            const double av = ai[l];
            const double* bl = b + l * k;
            for (int64_t j = 0; j < k; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
#pragma omp parallel for schedule(static) if (n > 1 && n * m * k > kParallelGrain)
    for (int64_t i = 0; i < n; ++i) {
        double* ci = c + i * k;
        for (int64_t j = 0; j < k; ++j) ci[j] = 0.0;
        const double* ai = a + i * m;
        for (int64_t l = 0; l < m; ++l) {
            const double av = ai[l];
            const double* bl = b + l * k;
            for (int64_t j = 0; j < k; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_tn_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * k;
        for (int64_t j = 0; j < k; ++j) ci[j] = 0.0;
        for (int64_t l = 0; l < n; ++l) {
            const double av = a[l * m + i];
            const double* bl = b + l * k;
            for (int64_t j = 0; j < k; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_tn_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
#pragma omp parallel for schedule(static) if (m > 1 && n * m * k > kParallelGrain)
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * k;
        for (int64_t j = 0; j < k; ++j) ci[j] = 0.0;
        for (int64_t l = 0; l < n; ++l) {
            const double av = a[l * m + i];
            const double* bl = b + l * k;
            for (int64_t j = 0; j < k; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_nt_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p) {
    for (int64_t i = 0; i < n; ++i) {
        const double* ai = a + i * m;
        double* ci = c + i * p;
        for (int64_t j = 0; j < p; ++j) {
            const double* bj = b + j * m;
            double acc = 0.0;
            for (int64_t l = 0; l < m; ++l) acc += ai[l] * bj[l];
            ci[j] = acc;
        }
    }
}

void matmul_nt_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p) {
#pragma omp parallel for schedule(static) if (n > 1 && n * m * p > kParallelGrain)
    for (int64_t i = 0; i < n; ++i) {
        const double* ai = a + i * m;
        double* ci = c + i * p;
        for (int64_t j = 0; j < p; ++j) {
            const double* bj = b + j * m;
            double acc = 0.0;
            for (int64_t l = 0; l < m; ++l) acc += ai[l] * bj[l];
            ci[j] = acc;
        }
    }
}

void matmul(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
    if (execution() == Exec::serial)
        matmul_serial(a, b, c, n, m, k);
    else
        matmul_openmp(a, b, c, n, m, k);
}

void matmul_tn(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k) {
    if (execution() == Exec::serial)
        matmul_tn_serial(a, b, c, n, m, k);
    else
        matmul_tn_openmp(a, b, c, n, m, k);
}

void matmul_nt(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p) {
    if (execution() == Exec::serial)
        matmul_nt_serial(a, b, c, n, m, p);
    else
        matmul_nt_openmp(a, b, c, n, m, p);
}

} // namespace tpad::kernels
