#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace topopt {

enum class SampleKind { monte_carlo, sparse_grid, tensor_gauss };

// Weighted parameter samples on [-1,1]^d under the uniform probability measure.
// Weights sum to 1. Monte Carlo and full-tensor Gauss rules have positive weights;
// Smolyak sparse grids carry signed weights for d >= 2 (inherent to the combination
// formula with non-nested Gauss-Legendre rules).
struct SampleSet {
  Eigen::MatrixXd points;   // N x d
  Eigen::VectorXd weights;  // length N, sums to 1
  SampleKind kind = SampleKind::monte_carlo;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// n-point Gauss-Legendre rule on [-1,1] normalized to the uniform probability
// measure (weights sum to 1); nodes ascending and exactly symmetric.
void gauss_legendre_unit(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// i.i.d. uniform draws, weights 1/N; reproducible from the seed.
SampleSet monte_carlo(int d, int N, std::uint64_t seed);

// Smolyak sparse grid built from 1-D Gauss-Legendre rules with 2i-1 points at
// level i; exact for total-degree 2*level-1 polynomials.
SampleSet sparse_grid(int d, int level);

// Full tensor product of a points_per_dim Gauss-Legendre rule.
SampleSet tensor_gauss(int d, int points_per_dim);

}  // namespace topopt
