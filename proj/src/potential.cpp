#include "balance/potential.hpp"

#include <algorithm>
#include <cmath>

namespace balance {

namespace {
constexpr double kExpGuard = 700.0;  // ln(DBL_MAX) ~ 709
}

double default_lambda(int kappa, long n, long T) {
  if (kappa < 1 || n < 1 || T < 1) throw InvalidInput("default_lambda: arguments must be >= 1");
  double denom = 100.0 * kappa * std::log(static_cast<double>(n) * static_cast<double>(T));
  if (denom <= 0.0 || !std::isfinite(denom)) return 1.0;  // ln(nT)=0 edge: n=T=1
  return std::max(1.0 / denom, 1e-9);
}

PotentialState::PotentialState(const ScaleDecomposition& dec, TestDistribution atoms,
                               double lambda, PotentialVariant variant)
    : dec_(&dec), atoms_(std::move(atoms)), lambda_(lambda), variant_(variant) {
  if (atoms_.empty()) throw InvalidInput("potential: empty atom set");
  if (lambda_ <= 0.0) throw InvalidInput("potential: lambda must be positive");
  const int n = dec_->n;
  const int m = static_cast<int>(atoms_.size());
  weights_.resize(m);
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    const TestAtom& a = atoms_[j];
    if (a.vec.size() != n || !a.vec.allFinite())
      throw InvalidInput("potential: atom dimension/finiteness violation");
    if (a.weight <= 0.0) throw InvalidInput("potential: atom weight must be positive");
    weights_(j) = a.weight;
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw InvalidInput("potential: atom weights must sum to 1");

  for (const auto& [k, pi] : dec_->projectors) {
    ScaleCache sc;
    sc.k = k;
    sc.proj_atoms.resize(n, m);
    for (int j = 0; j < m; ++j) sc.proj_atoms.col(j) = pi * atoms_[j].vec;
    sc.exps = VectorXd::Zero(m);
    scales_.push_back(std::move(sc));
  }
  empty_scales_ = dec_->kappa - static_cast<int>(scales_.size());
  d_ = VectorXd::Zero(n);
  phi_ = static_cast<double>(dec_->kappa);  // term(0) = 1 per scale
}

double PotentialState::term(double a) const {
  return variant_ == PotentialVariant::Cosh ? std::cosh(a) : std::exp(a);
}

double PotentialState::term_delta(double a, double b) const {
  check_exponent(a + b);
  return term(a + b) - term(a);
}

void PotentialState::check_exponent(double a) const {
  if (std::abs(a) > kExpGuard)
    throw OverflowError("potential: exponent beyond guard; lambda too large for this stream");
}

double PotentialState::recompute() const {
  double phi = static_cast<double>(empty_scales_);
  for (const ScaleCache& sc : scales_) {
    VectorXd a = lambda_ * (sc.proj_atoms.transpose() * d_);
    for (int j = 0; j < a.size(); ++j) phi += weights_(j) * term(a(j));
  }
  return phi;
}

double PotentialState::delta_for_step(const VectorXd& v, double alpha) const {
  if (v.size() != d_.size()) throw InvalidInput("potential: dimension mismatch");
  double delta = 0.0;
  for (const ScaleCache& sc : scales_) {
    VectorXd g = (lambda_ * alpha) * (sc.proj_atoms.transpose() * v);
    for (int j = 0; j < g.size(); ++j)
      delta += weights_(j) * term_delta(sc.exps(j), g(j));
  }
  if (!std::isfinite(delta)) throw OverflowError("potential: non-finite delta");
  return delta;
}

int PotentialState::choose_sign(const VectorXd& v) const {
  double dp = delta_for_sign(v, +1);
  double dm = delta_for_sign(v, -1);
  if (std::abs(dp - dm) <= 1e-12) return +1;
  return dp < dm ? +1 : -1;
}

void PotentialState::apply(const VectorXd& v, int chi) {
  if (chi != 1 && chi != -1) throw InvalidInput("potential: sign must be +-1");
  apply_step(v, static_cast<double>(chi));
}

void PotentialState::apply_step(const VectorXd& v, double alpha) {
  if (v.size() != d_.size()) throw InvalidInput("potential: dimension mismatch");
  d_ += alpha * v;
  double phi = static_cast<double>(empty_scales_);
  for (ScaleCache& sc : scales_) {
    sc.exps.noalias() += (lambda_ * alpha) * (sc.proj_atoms.transpose() * v);
    for (int j = 0; j < sc.exps.size(); ++j) {
      check_exponent(sc.exps(j));
      phi += weights_(j) * term(sc.exps(j));
    }
  }
  phi_ = phi;
  ++t_;
}

int PotentialState::step(const VectorXd& v) {
  if (v.size() != d_.size()) throw InvalidInput("potential: dimension mismatch");
  // One fused pass: per scale compute the exponent shifts once, evaluate both
  // signs, then commit the winner without re-projecting.
  std::vector<VectorXd> shifts(scales_.size());
  double dp = 0.0, dm = 0.0;
  for (size_t s = 0; s < scales_.size(); ++s) {
    const ScaleCache& sc = scales_[s];
    shifts[s] = lambda_ * (sc.proj_atoms.transpose() * v);
    const VectorXd& g = shifts[s];
    for (int j = 0; j < g.size(); ++j) {
      double a = sc.exps(j), w = weights_(j), t0 = term(a);
      check_exponent(a + std::abs(g(j)));
      dp += w * (term(a + g(j)) - t0);
      dm += w * (term(a - g(j)) - t0);
    }
  }
  if (!std::isfinite(dp) || !std::isfinite(dm))
    throw OverflowError("potential: non-finite delta");
  int chi = (std::abs(dp - dm) <= 1e-12) ? +1 : (dp < dm ? +1 : -1);
  d_ += chi * v;
  double phi = static_cast<double>(empty_scales_);
  for (size_t s = 0; s < scales_.size(); ++s) {
    ScaleCache& sc = scales_[s];
    sc.exps.noalias() += chi * shifts[s];
    for (int j = 0; j < sc.exps.size(); ++j) phi += weights_(j) * term(sc.exps(j));
  }
  phi_ = phi;
  ++t_;
  return chi;
}

std::pair<bool, double> PotentialState::good_set_check(const VectorXd& v,
                                                       double delta) const {
  if (delta <= 0.0 || delta >= 1.0) throw InvalidInput("good_set_check: delta in (0,1)");
  double ip = d_.dot(dec_->project_all(v));
  double threshold = dec_->kappa * std::log(4.0 * phi_ / delta);
  return {lambda_ * std::abs(ip) <= threshold, threshold};
}

double PotentialState::test_direction_bound(const VectorXd& z, bool* bound_ok) const {
  double cap = std::log(4.0 * static_cast<double>(atoms_.size()) * phi_) / lambda_;
  double sum = 0.0;
  bool ok = true;
  for (const auto& [k, pi] : dec_->projectors) {
    double term_k = std::abs(d_.dot(pi * z));
    sum += term_k;
    if (term_k > cap + 1e-9) ok = false;
  }
  if (bound_ok) *bound_ok = ok;
  return sum;
}

DriftStats PotentialState::drift_probe(const Sampler& sampler, int m,
                                       std::mt19937_64& rng) const {
  if (m < 1) throw InvalidInput("drift_probe: m >= 1");
  double sum = 0.0, sumsq = 0.0, lin = 0.0, quad = 0.0, quad_star = 0.0;
  for (int i = 0; i < m; ++i) {
    VectorXd v = sampler(rng);
    double dp = delta_for_sign(v, +1);
    double dm = delta_for_sign(v, -1);
    double best = std::min(dp, dm);
    sum += best;
    sumsq += best * best;
    double odd = 0.5 * (dp - dm);   // chi * L
    double even = 0.5 * (dp + dm);  // Q + Q*
    // Second-order Taylor part of the even term.
    double q2 = 0.0;
    for (const ScaleCache& sc : scales_) {
      VectorXd g = lambda_ * (sc.proj_atoms.transpose() * v);
      for (int j = 0; j < g.size(); ++j) {
        double curv = variant_ == PotentialVariant::Cosh ? std::cosh(sc.exps(j))
                                                         : std::exp(sc.exps(j));
        q2 += 0.5 * weights_(j) * curv * g(j) * g(j);
      }
    }
    lin += std::abs(odd);
    quad += q2;
    quad_star += even - q2;
  }
  DriftStats out;
  out.mean = sum / m;
  double var = std::max(0.0, sumsq / m - out.mean * out.mean);
  out.stderr_ = std::sqrt(var / m);
  out.linear_abs = lin / m;
  out.quad = quad / m;
  out.quad_star = quad_star / m;
  return out;
}

}  // namespace balance
