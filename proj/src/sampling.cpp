#include "topopt/sampling.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "topopt/errors.hpp"

namespace topopt {

void gauss_legendre_unit(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (n < 1) throw ConfigError("gauss_legendre_unit: n must be >= 1");
  if (n == 1) {
    nodes = Eigen::VectorXd::Zero(1);
    weights = Eigen::VectorXd::Ones(1);
    return;
  }
  // Golub-Welsch: Jacobi matrix of the Legendre recurrence; eigenvalues are the
  // nodes, squared first eigenvector components the probability weights.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  if (eig.info() != Eigen::Success) throw NumericalError("gauss_legendre_unit: eigensolver failed");
  nodes = eig.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double v0 = eig.eigenvectors()(0, i);
    weights(i) = v0 * v0;
  }
  // enforce exact symmetry so equal nodes are bitwise equal across rules
  for (int i = 0; i < n / 2; ++i) {
    double x = 0.5 * (nodes(n - 1 - i) - nodes(i));
    nodes(i) = -x;
    nodes(n - 1 - i) = x;
    double w = 0.5 * (weights(i) + weights(n - 1 - i));
    weights(i) = weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) nodes(n / 2) = 0.0;
  weights /= weights.sum();
}

SampleSet monte_carlo(int d, int N, std::uint64_t seed) {
  if (d < 1) throw ConfigError("monte_carlo: d must be >= 1");
  if (N < 1) throw ConfigError("monte_carlo: N must be >= 1");
  std::mt19937_64 rng(seed);
  SampleSet s;
  s.kind = SampleKind::monte_carlo;
  s.seed = seed;
  s.points.resize(N, d);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < d; ++j) {
      // explicit 53-bit mapping to [0,1) so streams are platform-independent
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      s.points(i, j) = 2.0 * u - 1.0;
    }
  s.weights = Eigen::VectorXd::Constant(N, 1.0 / N);
  return s;
}

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

int rule_size(int level) { return 2 * level - 1; }

// All multi-indices i in [1,level]^d with smin <= |i| <= smax.
void enum_multi_indices(int d, int pos, int sum, int smin, int smax, std::vector<int>& mi,
                        const std::function<void(const std::vector<int>&, int)>& emit) {
  if (pos == d) {
    if (sum >= smin) emit(mi, sum);
    return;
  }
  for (int i = 1; sum + i + (d - pos - 1) <= smax; ++i) {
    mi[pos] = i;
    enum_multi_indices(d, pos + 1, sum + i, smin, smax, mi, emit);
  }
}

}  // namespace

SampleSet sparse_grid(int d, int level) {
  if (d < 1) throw ConfigError("sparse_grid: d must be >= 1");
  if (level < 1) throw ConfigError("sparse_grid: level must be >= 1");

  std::vector<Eigen::VectorXd> xs(level + 1), ws(level + 1);
  for (int i = 1; i <= level; ++i) gauss_legendre_unit(rule_size(i), xs[i], ws[i]);

  // Smolyak combination: sum over level <= |i| <= level+d-1 of
  //   (-1)^(level+d-1-|i|) * C(d-1, |i|-level) * tensor rule at i
  std::map<std::vector<double>, double> acc;
  std::vector<int> mi(d);
  enum_multi_indices(d, 0, 0, level, level + d - 1, mi,
                     [&](const std::vector<int>& idx, int s) {
                       int q = level + d - 1 - s;
                       double coeff = (q % 2 == 0 ? 1.0 : -1.0) * binom(d - 1, s - level);
                       std::vector<int> pos(d, 0);
                       std::vector<double> pt(d);
                       while (true) {
                         double w = coeff;
                         for (int j = 0; j < d; ++j) {
                           pt[j] = xs[idx[j]](pos[j]);
                           w *= ws[idx[j]](pos[j]);
                         }
                         acc[pt] += w;
                         int j = 0;
                         for (; j < d; ++j) {
                           if (++pos[j] < rule_size(idx[j])) break;
                           pos[j] = 0;
                         }
                         if (j == d) break;
                       }
                     });

  std::vector<std::pair<std::vector<double>, double>> kept;
  kept.reserve(acc.size());
  for (auto& [pt, w] : acc)
    if (std::abs(w) > 1e-15) kept.emplace_back(pt, w);

  SampleSet s;
  s.kind = SampleKind::sparse_grid;
  int N = static_cast<int>(kept.size());
  s.points.resize(N, d);
  s.weights.resize(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < d; ++j) s.points(i, j) = kept[i].first[j];
    s.weights(i) = kept[i].second;
  }
  s.weights /= s.weights.sum();
  return s;
}

SampleSet tensor_gauss(int d, int points_per_dim) {
  if (d < 1) throw ConfigError("tensor_gauss: d must be >= 1");
  if (points_per_dim < 1) throw ConfigError("tensor_gauss: points_per_dim must be >= 1");
  double total = std::pow(static_cast<double>(points_per_dim), d);
  if (total > 2e6) throw ConfigError("tensor_gauss: rule would exceed 2e6 points");

  Eigen::VectorXd x, w;
  gauss_legendre_unit(points_per_dim, x, w);
  int N = static_cast<int>(total);
  SampleSet s;
  s.kind = SampleKind::tensor_gauss;
  s.points.resize(N, d);
  s.weights.resize(N);
  std::vector<int> pos(d, 0);
  for (int i = 0; i < N; ++i) {
    double wt = 1.0;
    for (int j = 0; j < d; ++j) {
      s.points(i, j) = x(pos[j]);
      wt *= w(pos[j]);
    }
    s.weights(i) = wt;
    for (int j = 0; j < d; ++j) {
      if (++pos[j] < points_per_dim) break;
      pos[j] = 0;
    }
  }
  s.weights /= s.weights.sum();
  return s;
}

}  // namespace topopt
