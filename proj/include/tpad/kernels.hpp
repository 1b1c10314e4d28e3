#pragma once

#include <cstdint>

namespace tpad::kernels {

// Execution mode for the dense kernels. The serial path is the reference
// implementation; the OpenMP path parallelizes over output rows and computes
// each output element in the same order, so the two produce identical bits.
enum class Exec { serial, openmp };

Exec execution();
void set_execution(Exec mode);

// C(n x k) = A(n x m) * B(m x k)
void matmul(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
// C(m x k) = A(n x m)^T * B(n x k)
void matmul_tn(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
// C(n x p) = A(n x m) * B(p x m)^T
void matmul_nt(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p);

// Explicit-mode entry points (used by tests and the benchmark tool).
void matmul_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
void matmul_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
void matmul_tn_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
void matmul_tn_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t k);
void matmul_nt_serial(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p);
void matmul_nt_openmp(const double* a, const double* b, double* c, int64_t n, int64_t m, int64_t p);

} // namespace tpad::kernels
