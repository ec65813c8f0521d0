#pragma once

#include <optional>
#include <string>
#include <vector>

#include "balance/testsets.hpp"

namespace balance {

enum class DistKind { Sparse, Hypercube, Sphere, Finite };

struct InputSpec {
  DistKind kind = DistKind::Sparse;
  int n = 16;
  int s = 4;  // sparse only
  std::vector<VectorXd> support;   // finite only
  std::vector<double> probs;       // finite only
};

InputSpec parse_dist(const std::string& text, int n);  // "sparse:4" etc.

// i.i.d. sampler, sign-symmetrized so the mean is zero; all draws have
// ||v||_2 <= 1.
Sampler gen_input(const InputSpec& spec, bool symmetrize = true);

// Closed-form second moments of the (symmetrized) distribution.
CovarianceModel spec_covariance(const InputSpec& spec);

// Frozen surrogate pool of m draws, total weight 1.
TestDistribution input_pool(const Sampler& sampler, int m, uint64_t seed);

std::vector<long> checkpoint_schedule(long T, double ratio = 1.25);

struct RunTrace {
  std::vector<int> actions;           // signs, or colors for multicolor
  std::vector<double> phis;           // per step
  std::vector<double> deltas;         // per step
  std::vector<char> good_flags;       // per step (potential runs)
  std::vector<long> checkpoint_ts;
  std::vector<double> checkpoint_metric;  // max-so-far headline metric
  double phi_max = 0.0;
  double lambda = 0.0;
  int kappa = 0;
  double final_metric = 0.0;
};

struct PotentialRunHooks {
  // Called at each checkpoint with the live state; may record diagnostics.
  std::function<void(long t, const PotentialState&)> at_checkpoint;
};

struct KomlosParams {
  int pool_size = 512;
  double lambda_override = -1.0;
  int kappa_override = -1;
  double checkpoint_ratio = 1.25;
};

RunTrace run_komlos(const InputSpec& spec, long T, uint64_t seed,
                    const KomlosParams& params = {},
                    const PotentialRunHooks& hooks = {});

// Same loop with an arbitrary finite test set replacing the basis.
RunTrace run_testset(const InputSpec& spec, long T, uint64_t seed,
                     const TestDistribution& testset,
                     const KomlosParams& params = {},
                     const PotentialRunHooks& hooks = {});

struct BanaszczykParams {
  BodyKind body = BodyKind::EuclideanBall;
  int cloud_size = 4096;
  int pool_size = 512;
  double lambda_override = -1.0;
  int kappa_override = -1;
  double checkpoint_ratio = 1.25;
};

RunTrace run_banaszczyk(const InputSpec& spec, long T, uint64_t seed,
                        const BanaszczykParams& params = {},
                        const PotentialRunHooks& hooks = {});

enum class BaselineKind { RandomSign, L2Greedy };

// metric: "linf" or "knorm" (knorm needs body via run_banaszczyk's params).
RunTrace run_baseline(const InputSpec& spec, long T, uint64_t seed,
                      BaselineKind kind, const std::string& metric = "linf",
                      double knorm_rho = 0.0, double ratio = 1.25);

// Exhaustive offline optimum of max_t ||d_t|| over all signings; T <= 22.
double offline_oracle(const std::vector<VectorXd>& vectors,
                      const NormFn& norm);
double offline_oracle_linf(const std::vector<VectorXd>& vectors);

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  int points = 0;
};

// Least-squares slope of log(metric) vs log(t) over checkpoints in range.
SlopeFit slope_fit(const std::vector<long>& ts,
                   const std::vector<double>& metric, long t_min, long t_max);

std::string fmt17(double x);  // shortest round-trip-stable decimal, <=17 sig

int cli_run(int argc, const char* const* argv);

}  // namespace balance
