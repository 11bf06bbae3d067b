#pragma once

#include <vector>

#include "elastic/matrix.hpp"

namespace elastic {

double vec_dot(const std::vector<double>& a, const std::vector<double>& b);
double vec_norm(const std::vector<double>& a);

/// Orthonormal basis of span(vecs): modified Gram-Schmidt with one
/// re-orthogonalization pass, near-dependent inputs dropped.
std::vector<std::vector<double>> orthonormal_basis(const std::vector<std::vector<double>>& vecs);

/// Unit vector orthogonal to span(vecs), from a Gaussian draw. Throws
/// CapacityError when the span already covers the space.
std::vector<double> fresh_orthogonal_direction(const std::vector<std::vector<double>>& vecs,
                                               int dim, Rng& rng);

/// count mutually orthonormal random directions in R^dim.
std::vector<std::vector<double>> random_orthonormal_set(int dim, int count, Rng& rng);

}  // namespace elastic
