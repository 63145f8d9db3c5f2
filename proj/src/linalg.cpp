#include "spinchain/linalg.hpp"

#include <algorithm>

namespace spinchain::linalg {

namespace {

// Cyclic Jacobi sweeps; rot accumulates V such that A = V diag V^T when
// non-null.
void jacobi_core(std::vector<double>& a, int n, std::vector<double>* rot) {
  auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-26 * n * n) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        if (rot) {
          auto& v = *rot;
          for (int k = 0; k < n; ++k) {
            const double vkp = v[static_cast<size_t>(k) * n + p], vkq = v[static_cast<size_t>(k) * n + q];
            v[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
            v[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
  jacobi_core(a, n, nullptr);
  std::vector<double> eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = a[static_cast<size_t>(i) * n + i];
  std::sort(eigs.begin(), eigs.end());
  return eigs;
}

void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                  std::vector<std::vector<double>>& eigenvectors) {
  std::vector<double> rot(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) rot[static_cast<size_t>(i) * n + i] = 1.0;
  jacobi_core(a, n, &rot);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return a[static_cast<size_t>(x) * n + x] < a[static_cast<size_t>(y) * n + y];
  });
  eigenvalues.assign(static_cast<size_t>(n), 0.0);
  eigenvectors.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i) {
    eigenvalues[static_cast<size_t>(i)] = a[static_cast<size_t>(order[i]) * n + order[i]];
    for (int k = 0; k < n; ++k)
      eigenvectors[static_cast<size_t>(i)][static_cast<size_t>(k)] = rot[static_cast<size_t>(k) * n + order[i]];
  }
}

double smallest_singular_value(const std::vector<double>& a, int m, int k) {
  std::vector<double> g(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < m; ++i)
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c)
        g[static_cast<size_t>(r) * k + c] += a[static_cast<size_t>(i) * k + r] * a[static_cast<size_t>(i) * k + c];
  const std::vector<double> eigs = jacobi_eigenvalues(std::move(g), k);
  return std::sqrt(std::max(0.0, eigs.front()));
}

double pairwise_sum(const double* x, size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace spinchain::linalg
