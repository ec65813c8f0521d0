#pragma once

#include <map>
#include <vector>

#include "balance/common.hpp"

namespace balance {

// Spectral model of the input second moments. Eigenvalues are sorted
// nonincreasing and must lie in [0, 1] since inputs have unit norm.
struct CovarianceModel {
  int n = 0;
  MatrixXd sigma;    // n x n symmetric PSD
  VectorXd eigvals;  // nonincreasing
  MatrixXd eigvecs;  // columns, orthonormal

  void validate() const;  // throws InvalidInput on violated invariants
};

CovarianceModel covariance_from_matrix(const MatrixXd& sigma);
CovarianceModel estimate_covariance(const std::vector<VectorXd>& samples);

// Scale index used for the below-threshold subspace.
inline constexpr int kErrScale = 0;

// Rescaling map M and per-scale projectors: after applying M, every nonzero
// eigenvalue of the covariance is exactly 2^-k for some k in [1, kappa].
// Immutable after construction; safe to share across threads.
struct ScaleDecomposition {
  int n = 0;
  int kappa = 0;
  MatrixXd rescale;                 // M, PSD, ||M||_op <= 1
  std::map<int, MatrixXd> projectors;  // k -> Pi_k, nonempty scales only
  MatrixXd err_projector;           // Pi_err
  std::map<int, int> subspace_dims;
  MatrixXd source_eigvecs;          // eigenbasis of the source covariance

  // Pi_k x (k in [1,kappa]) or Pi_err x (k == kErrScale).
  VectorXd project(int k, const VectorXd& x) const;

  // Sum of the non-error projectors applied to x.
  VectorXd project_all(const VectorXd& x) const;

  int active_scales() const { return static_cast<int>(projectors.size()); }
};

ScaleDecomposition dyadic_reduce(const CovarianceModel& model, int kappa);

// A trivial decomposition with M = I and a single scale holding all of R^n.
// Used where the ambient dimension makes an eigendecomposition pointless
// (sparse box spaces) or the covariance is already a scaled identity.
ScaleDecomposition identity_decomposition(int n, int scale);

// 8 * ceil(ln(n*T)), clamped to [8, 64].
int default_kappa(long n, long T);

}  // namespace balance
