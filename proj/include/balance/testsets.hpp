#pragma once

#include <cstdint>
#include <vector>

#include "balance/potential.hpp"

namespace balance {

enum class BodyKind { EuclideanBall, ScaledCube, CustomPolarCloud };

struct GammaEstimate {
  double value = 0.0;  // Monte-Carlo Gaussian measure of K
  long samples = 0;
  double ci = 0.0;  // one standard error
};

// Symmetric convex body, represented through a finite cloud in its polar K°.
struct ConvexBodyRep {
  BodyKind kind = BodyKind::EuclideanBall;
  int n = 0;
  double rho = 0.0;  // ball: K = rho*B2; cube: K = [-rho, rho]^n
  std::vector<VectorXd> polar_cloud;  // symmetric (closed under negation)
  GammaEstimate gamma;
};

struct ChainingLayer {
  int ell = 0;       // resolution exponent, eps = 2^-ell
  double eps = 0.0;
  std::vector<int> net;  // indices into the scale's cloud
  // Edges connect each point of the next-finer layer to its nearest point
  // here; stored as (coarse net index, fine cloud index).
  std::vector<std::pair<int, int>> edges;
  double raw_weight = 0.0;  // 2^(-2/eps^2), before normalization
};

struct ChainingScale {
  int k = 0;
  double diam = 0.0;
  double eps_max = 0.0, eps_min = 0.0;
  std::vector<VectorXd> cloud;  // Pi_k applied to the body's polar cloud
  std::vector<ChainingLayer> layers;  // coarse to fine; layers[0].net = {origin}
  bool doubling_layer = false;  // extra coarse layer added when diam > 2
  bool truncated = false;       // admissible-layer cap hit
};

struct ChainingNet {
  int n = 0;
  double lambda = 0.0;
  std::vector<ChainingScale> scales;
};

TestDistribution basis_testset(int n);
TestDistribution eigen_testset(const ScaleDecomposition& dec);

// Half input pool, half test set.
TestDistribution komlos_mixture(const TestDistribution& input_pool,
                                const TestDistribution& testset);

// Half pool, quarter eigenvectors, quarter chaining edges (already scaled).
TestDistribution banaszczyk_mixture(const TestDistribution& input_pool,
                                    const TestDistribution& eigen,
                                    const TestDistribution& chaining);

ConvexBodyRep build_body(BodyKind kind, int n, uint64_t seed,
                         int cloud_size = 4096, long gamma_samples = 100000);
ConvexBodyRep custom_body(int n, std::vector<VectorXd> polar_cloud,
                          uint64_t seed, long gamma_samples = 100000);

bool covering_check(const std::vector<VectorXd>& net,
                    const std::vector<VectorXd>& cloud, double eps);

// Covering-number cap e^(4 w^2 / eps^2) from Gaussian width w.
double sudakov_bound(double w, double eps);

// nT_cap bounds the admissible layer count at 2*log2(n*T); pass 0 to skip.
ChainingNet build_chaining_net(const ConvexBodyRep& body,
                               const ScaleDecomposition& dec, double lambda,
                               long nT_cap = 0);

// Edge atoms scaled by r(l,k)^2, symmetrized, layer mass prop. 2^(-2/eps^2)
// within a uniformly chosen scale. Layers whose relative mass is below
// weight_floor are dropped from the distribution (they still exist in the net).
TestDistribution chaining_testset(const ChainingNet& net,
                                  double weight_floor = 1e-15);

// Net-based K-norm: sum_k [max over finest net of d' Pi_k z
//                          + eps_min(k) * ||Pi_k d||_2].
double knorm(const ConvexBodyRep& body, const ChainingNet& net,
             const ScaleDecomposition& dec, const VectorXd& d);

// Exact ||d||_K for the ball/cube kinds, for cross-validation.
double knorm_closed_form(const ConvexBodyRep& body, const VectorXd& d);

}  // namespace balance
