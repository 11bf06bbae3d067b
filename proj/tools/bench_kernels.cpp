// Times the serial reference kernels against the OpenMP ones and checks that
// their outputs are bit-identical.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "elastic/kernels.hpp"
#include "elastic/matrix.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double time_one(void (*fn)(const double*, const double*, double*, int, int, int, bool),
                const std::vector<double>& a, const std::vector<double>& b,
                std::vector<double>& c, int n, int iters) {
    fn(a.data(), b.data(), c.data(), n, n, n, false);  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn(a.data(), b.data(), c.data(), n, n, n, false);
    const auto t1 = Clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / iters;
}

struct Shape {
    const char* name;
    void (*serial)(const double*, const double*, double*, int, int, int, bool);
    void (*parallel)(const double*, const double*, double*, int, int, int, bool);
};

}  // namespace

int main(int argc, char** argv) {
    int iters = 5;
    std::vector<int> sizes = {128, 256, 384, 512};
    if (argc > 1) sizes = {std::atoi(argv[1])};
    if (argc > 2) iters = std::atoi(argv[2]);

    const Shape shapes[] = {
        {"nn", elastic::kernels::serial::matmul_nn, elastic::kernels::parallel::matmul_nn},
        {"nt", elastic::kernels::serial::matmul_nt, elastic::kernels::parallel::matmul_nt},
        {"tn", elastic::kernels::serial::matmul_tn, elastic::kernels::parallel::matmul_tn},
    };

    std::printf("%-6s %-6s %12s %12s %9s %10s\n", "kernel", "n", "serial(ms)", "openmp(ms)",
                "speedup", "bitmatch");
    for (int n : sizes) {
        elastic::Rng rng(12345);
        std::vector<double> a(static_cast<std::size_t>(n) * n), b(a.size());
        for (double& v : a) v = rng.gaussian();
        for (double& v : b) v = rng.gaussian();
        std::vector<double> c_serial(a.size()), c_parallel(a.size());

        for (const auto& s : shapes) {
            const double ts = time_one(s.serial, a, b, c_serial, n, iters);
            const double tp = time_one(s.parallel, a, b, c_parallel, n, iters);
            const bool match = c_serial == c_parallel;
            std::printf("%-6s %-6d %12.3f %12.3f %8.2fx %10s\n", s.name, n, ts * 1e3, tp * 1e3,
                        ts / tp, match ? "yes" : "NO");
            if (!match) return 1;
        }
    }
    const double flops = 2.0 * sizes.back() * sizes.back() * static_cast<double>(sizes.back());
    std::printf("(FLOPs at n=%d: %.2e per call)\n", sizes.back(), flops);
    return 0;
}
