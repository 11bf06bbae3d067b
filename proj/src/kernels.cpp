#include "elastic/kernels.hpp"

#include <algorithm>
#include <atomic>

namespace elastic::kernels {

namespace {

std::atomic<ExecMode> g_mode{ExecMode::Parallel};

// Below this many multiply-adds the OpenMP fork overhead dominates.
constexpr long long kParallelMinWork = 1LL << 15;

// Row helpers shared between serial and parallel so both compile to the same
// inner loops. Each writes one row of C with the k-reduction in ascending
// order.

inline void nn_row(const double* a_row, const double* b, double* c_row, int k, int n,
                   bool accumulate) {
    if (!accumulate) std::fill(c_row, c_row + n, 0.0);
    for (int kk = 0; kk < k; ++kk) {
        const double aik = a_row[kk];
        const double* b_row = b + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) c_row[j] += aik * b_row[j];
    }
}

inline void nt_row(const double* a_row, const double* b, double* c_row, int k, int n,
                   bool accumulate) {
    for (int j = 0; j < n; ++j) {
        const double* b_row = b + static_cast<std::size_t>(j) * k;
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
        c_row[j] = accumulate ? c_row[j] + acc : acc;
    }
}

inline void tn_row(const double* a, const double* b, double* c_row, int i, int m, int k, int n,
                   bool accumulate) {
    if (!accumulate) std::fill(c_row, c_row + n, 0.0);
    for (int kk = 0; kk < k; ++kk) {
        const double aki = a[static_cast<std::size_t>(kk) * m + i];
        const double* b_row = b + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) c_row[j] += aki * b_row[j];
    }
}

}  // namespace

void set_exec_mode(ExecMode mode) { g_mode.store(mode, std::memory_order_relaxed); }
ExecMode exec_mode() { return g_mode.load(std::memory_order_relaxed); }

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        nn_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n,
               accumulate);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        nt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n,
               accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i)
        tn_row(a, b, c + static_cast<std::size_t>(i) * n, i, m, k, n, accumulate);
}

}  // namespace serial

namespace parallel {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    const long long work = static_cast<long long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelMinWork)
    for (int i = 0; i < m; ++i)
        nn_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n,
               accumulate);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    const long long work = static_cast<long long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelMinWork)
    for (int i = 0; i < m; ++i)
        nt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n,
               accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    const long long work = static_cast<long long>(m) * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelMinWork)
    for (int i = 0; i < m; ++i)
        tn_row(a, b, c + static_cast<std::size_t>(i) * n, i, m, k, n, accumulate);
}

}  // namespace parallel

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (exec_mode() == ExecMode::Serial)
        serial::matmul_nn(a, b, c, m, k, n, accumulate);
    else
        parallel::matmul_nn(a, b, c, m, k, n, accumulate);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (exec_mode() == ExecMode::Serial)
        serial::matmul_nt(a, b, c, m, k, n, accumulate);
    else
        parallel::matmul_nt(a, b, c, m, k, n, accumulate);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (exec_mode() == ExecMode::Serial)
        serial::matmul_tn(a, b, c, m, k, n, accumulate);
    else
        parallel::matmul_tn(a, b, c, m, k, n, accumulate);
}

}  // namespace elastic::kernels
