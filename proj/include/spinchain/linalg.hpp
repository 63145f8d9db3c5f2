#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace spinchain::linalg {

// Eigenvalues of a symmetric n x n matrix (row-major), ascending.
// Cyclic Jacobi; intended for small n (<= ~64).
std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n);

// Full eigen-decomposition; eigenvalues ascending, eigenvectors[k] is the
// unit eigenvector for eigenvalue k.
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                  std::vector<std::vector<double>>& eigenvectors);

// Smallest singular value of an m x k matrix (row-major, k <= m, small k),
// via the spectrum of A^T A.
double smallest_singular_value(const std::vector<double>& a, int m, int k);

// Pairwise sum; error O(log n) ulp.
double pairwise_sum(const double* x, size_t n);

}  // namespace spinchain::linalg
