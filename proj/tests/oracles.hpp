// Test-only reference implementations, independent of the library's own
// numeric paths: dense SVD via one-sided Jacobi, least squares by normal
// equations, exhaustive clustering, chi-square and Welch statistics.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mgda/maze.hpp"
#include "mgda/mlp.hpp"

namespace oracles {

// Largest singular value by one-sided Jacobi rotations on the columns.
inline double svd_largest_singular_value(const mgda::Matrix& w) {
  const int m = w.rows, n = w.cols;
  std::vector<std::vector<double>> a;
  a.assign(std::size_t(n), std::vector<double>(std::size_t(m), 0.0));
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) a[std::size_t(c)][std::size_t(r)] = w.at(r, c);

  const auto dot = [&](int i, int j) {
    double s = 0.0;
    for (int r = 0; r < m; ++r) s += a[std::size_t(i)][std::size_t(r)] * a[std::size_t(j)][std::size_t(r)];
    return s;
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double aii = dot(i, i), ajj = dot(j, j), aij = dot(i, j);
        off += aij * aij;
        if (std::abs(aij) < 1e-15) continue;
        const double tau = (ajj - aii) / (2.0 * aij);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int r = 0; r < m; ++r) {
          const double x = a[std::size_t(i)][std::size_t(r)];
          const double y = a[std::size_t(j)][std::size_t(r)];
          a[std::size_t(i)][std::size_t(r)] = c * x - s * y;
          a[std::size_t(j)][std::size_t(r)] = s * x + c * y;
        }
      }
    }
    if (off < 1e-24) break;
  }
  double best = 0.0;
  for (int i = 0; i < n; ++i) best = std::max(best, std::sqrt(dot(i, i)));
  return best;
}

// x minimizing ||A x - b||_2 via normal equations with Gaussian elimination.
inline std::vector<double> least_squares(const std::vector<std::vector<double>>& rows,
                                         const std::vector<double>& b) {
  const std::size_t n = rows[0].size();
  std::vector<std::vector<double>> ata(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) ata[i][j] += rows[r][i] * rows[r][j];
      ata[i][n] += rows[r][i] * b[r];
    }
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
    }
    std::swap(ata[col], ata[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || ata[col][col] == 0.0) continue;
      const double f = ata[r][col] / ata[col][col];
      for (std::size_t c = col; c <= n; ++c) ata[r][c] -= f * ata[col][c];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (ata[i][i] != 0.0) x[i] = ata[i][n] / ata[i][i];
  }
  return x;
}

// Optimal 2-clustering of <= 16 points by exhaustive assignment enumeration;
// returns the minimal sum of squared distances to cluster means.
inline double brute_force_two_clustering(const std::vector<mgda::Goal>& pts,
                                         std::vector<int>* best_assign = nullptr) {
  const std::size_t n = pts.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (1ULL << n); ++mask) {
    double sx[2] = {0, 0}, sy[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int k = (mask >> i) & 1U;
      sx[k] += pts[i].x;
      sy[k] += pts[i].y;
      cnt[k] += 1;
    }
    if (cnt[0] == 0 || cnt[1] == 0) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int k = (mask >> i) & 1U;
      const double dx = pts[i].x - sx[k] / cnt[k];
      const double dy = pts[i].y - sy[k] / cnt[k];
      sse += dx * dx + dy * dy;
    }
    if (sse < best) {
      best = sse;
      if (best_assign) {
        best_assign->assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) (*best_assign)[i] = (mask >> i) & 1U;
      }
    }
  }
  return best;
}

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 0.0;
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// p-value of a chi-square statistic with the given degrees of freedom.
inline double chi2_pvalue(double stat, int dof) { return 1.0 - gamma_p(dof / 2.0, stat / 2.0); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One-sided Welch test p-value for mean(a) < mean(b), normal approximation
// (sample sizes here are in the hundreds).
inline double welch_less_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= double(v.size() - 1);
    return std::make_pair(m, var);
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double t = (ma - mb) / std::sqrt(va / double(a.size()) + vb / double(b.size()));
  return normal_cdf(t);
}

// Central finite-difference gradient check over every parameter of the net.
// loss must be a pure function of the net.
template <typename LossFn>
double max_param_grad_rel_error(mgda::Mlp& net, const mgda::GradientTape& analytic, LossFn loss,
                                double h = 1e-4) {
  double num2 = 0.0, diff2 = 0.0;
  const auto probe = [&](double& param, double g) {
    const double keep = param;
    param = keep + h;
    const double up = loss();
    param = keep - h;
    const double down = loss();
    param = keep;
    const double fd = (up - down) / (2.0 * h);
    num2 += fd * fd;
    diff2 += (g - fd) * (g - fd);
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (std::size_t k = 0; k < net.weights[l].data.size(); ++k) {
      probe(net.weights[l].data[k], analytic.d_weights[l].data[k]);
    }
    for (std::size_t k = 0; k < net.biases[l].size(); ++k) {
      probe(net.biases[l][k], analytic.d_biases[l][k]);
    }
  }
  return std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-12);
}

}  // namespace oracles
