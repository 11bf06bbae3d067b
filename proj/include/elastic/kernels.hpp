#pragma once

// Dense matmul kernels in the three orientations the backward pass needs.
// Two implementations with identical per-row code paths:
//   kernels::serial   - reference, plain loops
//   kernels::parallel - OpenMP over output rows
// Rows are independent and each output entry is reduced in fixed k-ascending
// order, so the two produce bit-identical results; tests assert this and
// tools/bench_kernels compares their throughput.

namespace elastic::kernels {

enum class ExecMode { Serial, Parallel };

void set_exec_mode(ExecMode mode);
ExecMode exec_mode();

namespace serial {
// C (m×n) = A (m×k) · B (k×n); += when accumulate
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// C (m×n) = A (m×k) · B(n×k)ᵀ
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// C (m×n) = A(k×m)ᵀ · B (k×n)
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
}  // namespace serial

namespace parallel {
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
}  // namespace parallel

// Dispatch on the current ExecMode (default Parallel).
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

}  // namespace elastic::kernels
