#include "balance/covariance.hpp"

#include <algorithm>
#include <cmath>

namespace balance {

namespace {

constexpr double kTol = 1e-9;

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entries");
}

}  // namespace

void CovarianceModel::validate() const {
  if (n <= 0) throw InvalidInput("covariance: empty model");
  check_finite(sigma, "covariance");
  MatrixXd rebuilt = eigvecs * eigvals.asDiagonal() * eigvecs.transpose();
  if ((rebuilt - sigma).norm() > kTol) throw InvalidInput("covariance: eigendecomposition mismatch");
  MatrixXd gram = eigvecs.transpose() * eigvecs - MatrixXd::Identity(n, n);
  if (gram.cwiseAbs().maxCoeff() > kTol) throw InvalidInput("covariance: eigvecs not orthonormal");
  for (int i = 0; i < n; ++i) {
    if (eigvals(i) < -kTol || eigvals(i) > 1.0 + kTol)
      throw InvalidInput("covariance: eigenvalue outside [0,1]");
    if (i > 0 && eigvals(i) > eigvals(i - 1) + kTol)
      throw InvalidInput("covariance: eigenvalues not sorted");
  }
}

CovarianceModel covariance_from_matrix(const MatrixXd& sigma) {
  if (sigma.rows() == 0 || sigma.rows() != sigma.cols())
    throw InvalidInput("covariance: matrix must be square and nonempty");
  check_finite(sigma, "covariance");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > kTol)
    throw InvalidInput("covariance: matrix not symmetric");

  CovarianceModel model;
  model.n = static_cast<int>(sigma.rows());
  model.sigma = 0.5 * (sigma + sigma.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(model.sigma);
  if (solver.info() != Eigen::Success) throw InvalidInput("covariance: eigensolver failed");

  // Solver returns ascending order; flip to nonincreasing.
  const int n = model.n;
  model.eigvals.resize(n);
  model.eigvecs.resize(n, n);
  for (int i = 0; i < n; ++i) {
    double ev = solver.eigenvalues()(n - 1 - i);
    model.eigvals(i) = std::clamp(ev, 0.0, 1.0);
    model.eigvecs.col(i) = solver.eigenvectors().col(n - 1 - i);
    if (ev < -kTol || ev > 1.0 + kTol)
      throw InvalidInput("covariance: eigenvalue outside [0,1]");
  }
  model.sigma = model.eigvecs * model.eigvals.asDiagonal() * model.eigvecs.transpose();
  return model;
}

CovarianceModel estimate_covariance(const std::vector<VectorXd>& samples) {
  if (samples.empty()) throw InvalidInput("estimate_covariance: no samples");
  const auto n = samples.front().size();
  MatrixXd sigma = MatrixXd::Zero(n, n);
  for (const VectorXd& v : samples) {
    if (v.size() != n) throw InvalidInput("estimate_covariance: inconsistent dimensions");
    if (!v.allFinite()) throw InvalidInput("estimate_covariance: non-finite sample");
    if (v.norm() > 1.0 + kTol) throw InvalidInput("estimate_covariance: sample norm exceeds 1");
    sigma.noalias() += v * v.transpose();
  }
  sigma /= static_cast<double>(samples.size());
  return covariance_from_matrix(sigma);
}

int default_kappa(long n, long T) {
  if (n < 1 || T < 1) throw InvalidInput("default_kappa: n, T must be positive");
  double lg = std::log(static_cast<double>(n) * static_cast<double>(T));
  if (!std::isfinite(lg)) return 64;
  long k = 8 * static_cast<long>(std::ceil(lg));
  return static_cast<int>(std::clamp(k, 8L, 64L));
}

VectorXd ScaleDecomposition::project(int k, const VectorXd& x) const {
  if (k == kErrScale) return err_projector * x;
  if (k < 1 || k > kappa) throw InvalidInput("project: scale out of range");
  auto it = projectors.find(k);
  if (it == projectors.end()) return VectorXd::Zero(n);
  return it->second * x;
}

VectorXd ScaleDecomposition::project_all(const VectorXd& x) const {
  VectorXd out = VectorXd::Zero(n);
  for (const auto& [k, pi] : projectors) out.noalias() += pi * x;
  return out;
}

ScaleDecomposition dyadic_reduce(const CovarianceModel& model, int kappa) {
  model.validate();
  if (kappa < 1) throw InvalidInput("dyadic_reduce: kappa must be >= 1");
  for (int i = 0; i < model.n; ++i)
    if (model.eigvals(i) > 1.0 + kTol) throw InvalidInput("dyadic_reduce: eigenvalue > 1");

  const int n = model.n;
  ScaleDecomposition dec;
  dec.n = n;
  dec.kappa = kappa;
  dec.rescale = MatrixXd::Zero(n, n);
  dec.err_projector = MatrixXd::Zero(n, n);
  dec.source_eigvecs = model.eigvecs;

  const double boundary_tol = 1e-12;
  for (int i = 0; i < n; ++i) {
    double sigma = model.eigvals(i);
    const VectorXd u = model.eigvecs.col(i);
    // sigma in (2^-k, 2^-k+1] -> scale k; values within 1e-12 of the 2^-k
    // boundary resolve downward (to scale k).
    int k;
    if (sigma <= std::ldexp(1.0, -kappa) * (1.0 + boundary_tol)) {
      k = kErrScale;
    } else {
      k = std::max(1, static_cast<int>(std::ceil(-std::log2(sigma) - 1e-9)));
      k = std::min(k, kappa);
    }
    if (k == kErrScale) {
      dec.err_projector.noalias() += u * u.transpose();
      continue;
    }
    double scale = 1.0 / std::sqrt(std::ldexp(1.0, k) * sigma);  // (2^k sigma)^-1/2
    dec.rescale.noalias() += scale * (u * u.transpose());
    auto [it, inserted] = dec.projectors.try_emplace(k, MatrixXd::Zero(n, n));
    it->second.noalias() += u * u.transpose();
    dec.subspace_dims[k] += 1;
  }
  return dec;
}

ScaleDecomposition identity_decomposition(int n, int scale) {
  if (n < 1 || scale < 1) throw InvalidInput("identity_decomposition: bad arguments");
  ScaleDecomposition dec;
  dec.n = n;
  dec.kappa = scale;
  dec.rescale = MatrixXd::Identity(n, n);
  dec.err_projector = MatrixXd::Zero(n, n);
  dec.source_eigvecs = MatrixXd::Identity(n, n);
  dec.projectors[scale] = MatrixXd::Identity(n, n);
  dec.subspace_dims[scale] = n;
  return dec;
}

}  // namespace balance
