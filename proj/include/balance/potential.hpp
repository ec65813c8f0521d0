#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "balance/covariance.hpp"

namespace balance {

enum class AtomTag { InputSurrogate, Basis, Eigen, ChainingEdge };

struct TestAtom {
  VectorXd vec;
  double weight = 0.0;
  AtomTag tag = AtomTag::Basis;
};

using TestDistribution = std::vector<TestAtom>;

enum class PotentialVariant { Cosh, Exp };

// 1 / (100 * kappa * ln(n*T)), clamped below by 1e-9.
double default_lambda(int kappa, long n, long T);

struct DriftStats {
  double mean = 0.0;        // mean of the greedy (min-sign) potential change
  double stderr_ = 0.0;
  double linear_abs = 0.0;  // mean |odd part| of the change
  double quad = 0.0;        // mean second-order Taylor term
  double quad_star = 0.0;   // mean residual of the even part beyond quad
};

using Sampler = std::function<VectorXd(std::mt19937_64&)>;
using NormFn = std::function<double(const VectorXd&)>;

// Potential over a finite test-atom distribution: sum over scales k of
// E_x[term(lambda * d' Pi_k x)], with term = cosh or exp. Scales with no
// projector contribute the constant term(0) = 1 each. Single writer;
// const probes are safe between arrivals.
class PotentialState {
 public:
  PotentialState(const ScaleDecomposition& dec, TestDistribution atoms,
                 double lambda, PotentialVariant variant);

  double potential() const { return phi_; }
  double recompute() const;  // from d and raw projections, bypassing caches

  // Phi(d + alpha*v) - Phi(d); alpha generalizes the sign for tree walks.
  double delta_for_step(const VectorXd& v, double alpha) const;
  double delta_for_sign(const VectorXd& v, int chi) const {
    return delta_for_step(v, static_cast<double>(chi));
  }

  int choose_sign(const VectorXd& v) const;       // ties (<=1e-12) -> +1
  void apply(const VectorXd& v, int chi);         // d += chi*v, t += 1
  void apply_step(const VectorXd& v, double alpha);  // d += alpha*v, t += 1
  int step(const VectorXd& v);                    // choose_sign + apply, fused

  // true iff lambda*|d' Pi v| <= kappa * ln(4*Phi/delta), Pi = sum_k Pi_k.
  std::pair<bool, double> good_set_check(const VectorXd& v, double delta) const;

  // Sum over scales of |d' Pi_k z|; *bound_ok (if given) reports whether each
  // term respects lambda^-1 * ln(4*|atoms|*Phi).
  double test_direction_bound(const VectorXd& z, bool* bound_ok = nullptr) const;

  DriftStats drift_probe(const Sampler& sampler, int m, std::mt19937_64& rng) const;

  const VectorXd& discrepancy() const { return d_; }
  double lambda() const { return lambda_; }
  int kappa() const { return dec_->kappa; }
  long step_count() const { return t_; }
  PotentialVariant variant() const { return variant_; }
  const TestDistribution& atoms() const { return atoms_; }
  const ScaleDecomposition& decomposition() const { return *dec_; }

 private:
  struct ScaleCache {
    int k;
    MatrixXd proj_atoms;  // n x |atoms|, column j = Pi_k x_j
    VectorXd exps;        // a_{x,k} = lambda * d' Pi_k x
  };

  double term(double a) const;
  double term_delta(double a, double b) const;  // term(a+b) - term(a)
  void check_exponent(double a) const;

  const ScaleDecomposition* dec_;
  TestDistribution atoms_;
  VectorXd weights_;
  double lambda_;
  PotentialVariant variant_;
  std::vector<ScaleCache> scales_;
  int empty_scales_;
  VectorXd d_;
  double phi_;
  long t_ = 0;
};

}  // namespace balance
