#include "elastic/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace elastic {

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double vec_norm(const std::vector<double>& a) { return std::sqrt(vec_dot(a, a)); }

std::vector<std::vector<double>> orthonormal_basis(const std::vector<std::vector<double>>& vecs) {
    std::vector<std::vector<double>> basis;
    for (const auto& v : vecs) {
        std::vector<double> w = v;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const double c = vec_dot(w, b);
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * b[i];
            }
        const double n = vec_norm(w);
        if (n > 1e-12 * std::max(1.0, vec_norm(v))) {
            for (double& x : w) x /= n;
            basis.push_back(std::move(w));
        }
    }
    return basis;
}

std::vector<double> fresh_orthogonal_direction(const std::vector<std::vector<double>>& vecs,
                                               int dim, Rng& rng) {
    const auto basis = orthonormal_basis(vecs);
    if (static_cast<int>(basis.size()) >= dim)
        throw CapacityError("fresh_orthogonal_direction: span already covers the space");
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.gaussian();
        const double n0 = vec_norm(v);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const double c = vec_dot(v, b);
                for (int i = 0; i < dim; ++i) v[i] -= c * b[i];
            }
        const double n = vec_norm(v);
        if (n > 1e-8 * n0) {
            for (double& x : v) x /= n;
            return v;
        }
    }
    throw CapacityError("fresh_orthogonal_direction: no orthogonal direction found");
}

std::vector<std::vector<double>> random_orthonormal_set(int dim, int count, Rng& rng) {
    std::vector<std::vector<double>> set;
    for (int i = 0; i < count; ++i) set.push_back(fresh_orthogonal_direction(set, dim, rng));
    return set;
}

}  // namespace elastic
