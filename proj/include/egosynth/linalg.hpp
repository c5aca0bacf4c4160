#pragma once

#include <cstddef>
#include <vector>

namespace egosynth::linalg {

/// Eigendecomposition of a dense symmetric matrix (row-major n*n) by cyclic
/// Jacobi sweeps. Returns eigenvalues sorted descending; `eigvecs` holds the
/// matching eigenvectors as rows (row i pairs with eigenvalue i). Eigenvector
/// signs are fixed so the largest-magnitude component is positive.
void eigen_symmetric(std::size_t n, const std::vector<double>& a,
                     std::vector<double>& eigvals, std::vector<double>& eigvecs);

}  // namespace egosynth::linalg
