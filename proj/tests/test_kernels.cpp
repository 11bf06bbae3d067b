#include "doctest.h"

#include <vector>

#include "elastic/kernels.hpp"
#include "elastic/matrix.hpp"

using namespace elastic;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

}  // namespace

TEST_CASE("serial and parallel kernels are bit-identical") {
    Rng rng(7);
    // sizes straddling the parallel cutoff, including degenerate shapes
    const int shapes[][3] = {{1, 1, 1}, {3, 4, 2}, {16, 16, 16}, {40, 33, 47}, {64, 64, 64}};
    for (const auto& s : shapes) {
        const int m = s[0], k = s[1], n = s[2];
        const auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
        const auto b_nn = random_vec(static_cast<std::size_t>(k) * n, rng);
        const auto b_nt = random_vec(static_cast<std::size_t>(n) * k, rng);
        const auto a_tn = random_vec(static_cast<std::size_t>(k) * m, rng);

        std::vector<double> c1(static_cast<std::size_t>(m) * n), c2 = c1;
        kernels::serial::matmul_nn(a.data(), b_nn.data(), c1.data(), m, k, n, false);
        kernels::parallel::matmul_nn(a.data(), b_nn.data(), c2.data(), m, k, n, false);
        CHECK(c1 == c2);

        kernels::serial::matmul_nt(a.data(), b_nt.data(), c1.data(), m, k, n, true);
        kernels::parallel::matmul_nt(a.data(), b_nt.data(), c2.data(), m, k, n, true);
        CHECK(c1 == c2);

        kernels::serial::matmul_tn(a_tn.data(), b_nn.data(), c1.data(), m, k, n, false);
        kernels::parallel::matmul_tn(a_tn.data(), b_nn.data(), c2.data(), m, k, n, false);
        CHECK(c1 == c2);
    }
}

TEST_CASE("matmul orientations agree with each other via transposition") {
    Rng rng(11);
    const int m = 5, k = 7, n = 3;
    const auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, rng);

    std::vector<double> c_ref(static_cast<std::size_t>(m) * n);
    kernels::serial::matmul_nn(a.data(), b.data(), c_ref.data(), m, k, n, false);

    // nt with explicitly transposed b
    std::vector<double> bt(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) bt[static_cast<std::size_t>(j) * k + i] = b[static_cast<std::size_t>(i) * n + j];
    std::vector<double> c_nt(c_ref.size());
    kernels::serial::matmul_nt(a.data(), bt.data(), c_nt.data(), m, k, n, false);
    for (std::size_t i = 0; i < c_ref.size(); ++i) CHECK(c_nt[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));

    // tn with explicitly transposed a
    std::vector<double> at(static_cast<std::size_t>(k) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) at[static_cast<std::size_t>(j) * m + i] = a[static_cast<std::size_t>(i) * k + j];
    std::vector<double> c_tn(c_ref.size());
    kernels::serial::matmul_tn(at.data(), b.data(), c_tn.data(), m, k, n, false);
    for (std::size_t i = 0; i < c_ref.size(); ++i) CHECK(c_tn[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
}

TEST_CASE("repeated calls are bit-deterministic") {
    Rng rng(3);
    const int m = 24, k = 24, n = 24;
    const auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> c1(static_cast<std::size_t>(m) * n), c2 = c1;
    kernels::matmul_nn(a.data(), b.data(), c1.data(), m, k, n, false);
    kernels::matmul_nn(a.data(), b.data(), c2.data(), m, k, n, false);
    CHECK(c1 == c2);
}

TEST_CASE("exec mode dispatch switches implementations") {
    const auto saved = kernels::exec_mode();
    kernels::set_exec_mode(kernels::ExecMode::Serial);
    CHECK(kernels::exec_mode() == kernels::ExecMode::Serial);
    kernels::set_exec_mode(saved);
}
