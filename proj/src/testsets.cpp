#include "balance/testsets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace balance {

namespace {

void check_normalized(const TestDistribution& dist, const char* what) {
  if (dist.empty()) throw InvalidInput(std::string(what) + ": empty component");
  double total = 0.0;
  for (const TestAtom& a : dist) total += a.weight;
  if (std::abs(total - 1.0) > 1e-9)
    throw InvalidInput(std::string(what) + ": component weights must sum to 1");
}

void append_scaled(TestDistribution& out, const TestDistribution& in, double share) {
  for (const TestAtom& a : in) out.push_back({a.vec, a.weight * share, a.tag});
}

// Max-min-distance greedy cover of the cloud at resolution eps. Deterministic:
// the first pick is the largest-norm point, ties by lowest index.
std::vector<int> greedy_net(const std::vector<VectorXd>& cloud, double eps) {
  const int m = static_cast<int>(cloud.size());
  std::vector<int> net;
  if (m == 0) return net;
  std::vector<double> mindist(m, std::numeric_limits<double>::infinity());
  int next = 0;
  double best = -1.0;
  for (int i = 0; i < m; ++i) {
    double nn = cloud[i].norm();
    if (nn > best + 1e-15) { best = nn; next = i; }
  }
  while (true) {
    net.push_back(next);
    const VectorXd& p = cloud[next];
    best = -1.0;
    int arg = -1;
    for (int i = 0; i < m; ++i) {
      double dd = (cloud[i] - p).norm();
      if (dd < mindist[i]) mindist[i] = dd;
      if (mindist[i] > best + 1e-15) { best = mindist[i]; arg = i; }
    }
    if (best <= eps + 1e-9) break;
    next = arg;
  }
  return net;
}

GammaEstimate monte_carlo_gamma(int n, long samples, uint64_t seed,
                                const std::function<bool(const VectorXd&)>& member) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  long hits = 0;
  VectorXd g(n);
  for (long i = 0; i < samples; ++i) {
    for (int j = 0; j < n; ++j) g(j) = gauss(rng);
    if (member(g)) ++hits;
  }
  GammaEstimate est;
  est.samples = samples;
  est.value = static_cast<double>(hits) / samples;
  est.ci = std::sqrt(std::max(est.value * (1.0 - est.value), 1e-12) / samples);
  return est;
}

void gate_gamma(const GammaEstimate& est) {
  if (est.value < 0.5 - 2.0 * est.ci)
    throw InvalidInput("body rejected: Gaussian measure estimate below 1/2");
}

}  // namespace

TestDistribution basis_testset(int n) {
  if (n < 1) throw InvalidInput("basis_testset: n >= 1");
  TestDistribution out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    VectorXd e = VectorXd::Zero(n);
    e(i) = 1.0;
    out.push_back({std::move(e), 1.0 / n, AtomTag::Basis});
  }
  return out;
}

TestDistribution eigen_testset(const ScaleDecomposition& dec) {
  const int n = dec.n;
  if (dec.source_eigvecs.rows() != n) throw InvalidInput("eigen_testset: missing eigenbasis");
  TestDistribution out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back({dec.source_eigvecs.col(i), 1.0 / n, AtomTag::Eigen});
  return out;
}

TestDistribution komlos_mixture(const TestDistribution& input_pool,
                                const TestDistribution& testset) {
  check_normalized(input_pool, "komlos_mixture pool");
  check_normalized(testset, "komlos_mixture testset");
  TestDistribution out;
  out.reserve(input_pool.size() + testset.size());
  append_scaled(out, input_pool, 0.5);
  append_scaled(out, testset, 0.5);
  for (const TestAtom& a : out)
    if (a.vec.norm() > 1.0 + 1e-9)
      throw InvalidInput("komlos_mixture: atom norm exceeds 1");
  return out;
}

TestDistribution banaszczyk_mixture(const TestDistribution& input_pool,
                                    const TestDistribution& eigen,
                                    const TestDistribution& chaining) {
  check_normalized(input_pool, "banaszczyk_mixture pool");
  check_normalized(eigen, "banaszczyk_mixture eigen");
  check_normalized(chaining, "banaszczyk_mixture chaining");
  TestDistribution out;
  out.reserve(input_pool.size() + eigen.size() + chaining.size());
  append_scaled(out, input_pool, 0.5);
  append_scaled(out, eigen, 0.25);
  append_scaled(out, chaining, 0.25);
  return out;
}

ConvexBodyRep build_body(BodyKind kind, int n, uint64_t seed, int cloud_size,
                         long gamma_samples) {
  if (n < 1 || cloud_size < 2) throw InvalidInput("build_body: bad arguments");
  ConvexBodyRep body;
  body.kind = kind;
  body.n = n;
  auto rng = make_rng(splitmix64(seed ^ 0x626f6479ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (kind == BodyKind::EuclideanBall) {
    body.rho = std::sqrt(static_cast<double>(n));
    for (int i = 0; i < cloud_size / 2; ++i) {
      VectorXd y(n);
      for (int j = 0; j < n; ++j) y(j) = gauss(rng);
      double nn = y.norm();
      if (nn < 1e-12) { --i; continue; }
      y *= 1.0 / (body.rho * nn);  // on the sphere of radius 1/rho
      body.polar_cloud.push_back(y);
      body.polar_cloud.push_back(-y);
    }
    double rho = body.rho;
    body.gamma = monte_carlo_gamma(n, gamma_samples, seed,
        [rho](const VectorXd& g) { return g.norm() <= rho; });
  } else if (kind == BodyKind::ScaledCube) {
    body.rho = std::sqrt(2.0 * std::log(2.0 * n));
    // K = [-rho, rho]^n, so K° = (1/rho) * cross-polytope. Seed the cloud with
    // the vertices, then random boundary points (simplex mix of signed axes).
    for (int i = 0; i < n; ++i) {
      VectorXd y = VectorXd::Zero(n);
      y(i) = 1.0 / body.rho;
      body.polar_cloud.push_back(y);
      body.polar_cloud.push_back(-y);
    }
    std::exponential_distribution<double> expd(1.0);
    std::bernoulli_distribution coin(0.5);
    while (static_cast<int>(body.polar_cloud.size()) < cloud_size) {
      VectorXd w(n);
      double tot = 0.0;
      for (int j = 0; j < n; ++j) { w(j) = expd(rng); tot += w(j); }
      VectorXd y(n);
      for (int j = 0; j < n; ++j)
        y(j) = (coin(rng) ? 1.0 : -1.0) * w(j) / (tot * body.rho);
      body.polar_cloud.push_back(y);
      body.polar_cloud.push_back(-y);
    }
    double rho = body.rho;
    body.gamma = monte_carlo_gamma(n, gamma_samples, seed,
        [rho](const VectorXd& g) { return g.cwiseAbs().maxCoeff() <= rho; });
  } else {
    throw InvalidInput("build_body: use custom_body for cloud bodies");
  }
  gate_gamma(body.gamma);
  return body;
}

ConvexBodyRep custom_body(int n, std::vector<VectorXd> polar_cloud,
                          uint64_t seed, long gamma_samples) {
  ConvexBodyRep body;
  body.kind = BodyKind::CustomPolarCloud;
  body.n = n;
  body.rho = 0.0;
  body.polar_cloud = std::move(polar_cloud);
  const auto& cloud = body.polar_cloud;
  // K is taken as the polar of the cloud: membership is max |<g, y>| <= 1.
  body.gamma = monte_carlo_gamma(n, gamma_samples, seed,
      [&cloud](const VectorXd& g) {
        for (const VectorXd& y : cloud)
          if (std::abs(g.dot(y)) > 1.0) return false;
        return true;
      });
  gate_gamma(body.gamma);
  return body;
}

bool covering_check(const std::vector<VectorXd>& net,
                    const std::vector<VectorXd>& cloud, double eps) {
  if (net.empty()) return cloud.empty();
  for (const VectorXd& c : cloud) {
    double best = std::numeric_limits<double>::infinity();
    for (const VectorXd& p : net) best = std::min(best, (c - p).norm());
    if (best > eps + 1e-9) return false;
  }
  return true;
}

double sudakov_bound(double w, double eps) {
  if (w <= 0.0 || eps <= 0.0) throw InvalidInput("sudakov_bound: w, eps > 0");
  return std::exp(4.0 * w * w / (eps * eps));
}

ChainingNet build_chaining_net(const ConvexBodyRep& body,
                               const ScaleDecomposition& dec, double lambda,
                               long nT_cap) {
  if (lambda <= 0.0) throw InvalidInput("build_chaining_net: lambda > 0");
  ChainingNet net;
  net.n = dec.n;
  net.lambda = lambda;

  int max_layers = std::numeric_limits<int>::max();
  if (nT_cap > 1)
    max_layers = std::max(1, static_cast<int>(2.0 * std::log2(static_cast<double>(nT_cap))));

  for (const auto& [k, pi] : dec.projectors) {
    ChainingScale scale;
    scale.k = k;
    scale.cloud.reserve(body.polar_cloud.size());
    double max_norm = 0.0;
    for (const VectorXd& y : body.polar_cloud) {
      scale.cloud.push_back(pi * y);
      max_norm = std::max(max_norm, scale.cloud.back().norm());
    }
    scale.diam = 2.0 * max_norm;  // symmetric cloud: farthest pair is antipodal
    if (scale.diam < 1e-12) continue;  // slice collapsed; nothing to test

    // eps_max = 2^(-log2 ceil(1/diam)), snapped to the dyadic grid.
    int ell_start;
    if (scale.diam > 2.0) {
      // Extra doubling layers so the origin still covers at the coarsest eps.
      ell_start = -static_cast<int>(std::ceil(std::log2(scale.diam / 2.0) - 1e-12));
      scale.doubling_layer = true;
    } else {
      double c = std::ceil(1.0 / scale.diam);
      ell_start = static_cast<int>(std::ceil(std::log2(c) - 1e-12));
    }
    scale.eps_max = std::ldexp(1.0, -ell_start);

    int dim = 0;
    if (auto it = dec.subspace_dims.find(k); it != dec.subspace_dims.end()) dim = it->second;
    if (dim <= 0) dim = 1;
    int ell_end = static_cast<int>(
        std::ceil(std::log2(std::sqrt(static_cast<double>(dim)) / (10.0 * lambda))));
    ell_end = std::max(ell_end, ell_start);
    if (ell_end - ell_start + 1 > max_layers) {
      ell_end = ell_start + max_layers - 1;
      scale.truncated = true;
    }
    scale.eps_min = std::ldexp(1.0, -ell_end);

    for (int ell = ell_start; ell <= ell_end; ++ell) {
      ChainingLayer layer;
      layer.ell = ell;
      layer.eps = std::ldexp(1.0, -ell);
      layer.raw_weight = std::exp2(-2.0 / (layer.eps * layer.eps));
      if (ell == ell_start) {
        layer.net = {-1};  // sentinel: the single coarse vertex is the origin
      } else {
        layer.net = greedy_net(scale.cloud, layer.eps);
      }
      scale.layers.push_back(std::move(layer));
    }

    // Edges: each finer net point to its nearest coarse net point.
    for (size_t i = 0; i + 1 < scale.layers.size(); ++i) {
      ChainingLayer& coarse = scale.layers[i];
      const ChainingLayer& fine = scale.layers[i + 1];
      for (size_t f = 0; f < fine.net.size(); ++f) {
        const VectorXd& p = scale.cloud[fine.net[f]];
        int arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < coarse.net.size(); ++c) {
          double dd = coarse.net[c] < 0 ? p.norm() : (p - scale.cloud[coarse.net[c]]).norm();
          if (dd < best - 1e-15) { best = dd; arg = static_cast<int>(c); }
        }
        if (best > coarse.eps + 1e-9)
          throw InvalidInput("build_chaining_net: covering failure between layers");
        coarse.edges.emplace_back(arg, fine.net[f]);
      }
      // |S| <= 2^(16/eps^2), compared in log space to dodge overflow. The
      // bound is a diam <= 2 fact, so extra doubling layers (eps > 1) are
      // exempt from the abort.
      double log_edges = std::log2(static_cast<double>(std::max<size_t>(coarse.edges.size(), 1)));
      if (coarse.eps <= 1.0 + 1e-12 &&
          log_edges > 16.0 / (coarse.eps * coarse.eps) + 1e-9)
        throw InvalidInput("build_chaining_net: edge bound violated; cloud too sparse");
    }
    net.scales.push_back(std::move(scale));
  }
  return net;
}

TestDistribution chaining_testset(const ChainingNet& net, double weight_floor) {
  struct ScaleAtoms {
    std::vector<TestAtom> atoms;
  };
  std::vector<ScaleAtoms> per_scale;
  for (const ChainingScale& scale : net.scales) {
    double total_raw = 0.0;
    for (const ChainingLayer& layer : scale.layers)
      if (!layer.edges.empty()) total_raw += layer.raw_weight;
    if (total_raw <= 0.0) continue;
    ScaleAtoms sa;
    for (const ChainingLayer& layer : scale.layers) {
      if (layer.edges.empty()) continue;
      double share = layer.raw_weight / total_raw;
      if (share < weight_floor) continue;
      double r2 = 1.0 / (layer.eps * layer.eps);
      double per_edge = share / layer.edges.size();
      for (const auto& [ci, fi] : layer.edges) {
        VectorXd coarse = layer.net[ci] < 0 ? VectorXd::Zero(net.n)
                                            : scale.cloud[layer.net[ci]];
        VectorXd e = r2 * (scale.cloud[fi] - coarse);
        // Symmetrized so the exp-variant potential stays two-sided.
        sa.atoms.push_back({e, per_edge / 2.0, AtomTag::ChainingEdge});
        sa.atoms.push_back({-e, per_edge / 2.0, AtomTag::ChainingEdge});
      }
    }
    if (!sa.atoms.empty()) per_scale.push_back(std::move(sa));
  }
  TestDistribution out;
  if (per_scale.empty()) return out;
  double scale_share = 1.0 / per_scale.size();
  double total = 0.0;
  for (const ScaleAtoms& sa : per_scale) {
    double sum = 0.0;
    for (const TestAtom& a : sa.atoms) sum += a.weight;
    for (const TestAtom& a : sa.atoms) {
      out.push_back({a.vec, a.weight / sum * scale_share, a.tag});
      total += out.back().weight;
    }
  }
  // Renormalize away accumulated rounding.
  for (TestAtom& a : out) a.weight /= total;
  return out;
}

double knorm(const ConvexBodyRep&, const ChainingNet& net,
             const ScaleDecomposition& dec, const VectorXd& d) {
  double out = 0.0;
  for (const ChainingScale& scale : net.scales) {
    if (scale.layers.empty()) continue;
    const ChainingLayer& finest = scale.layers.back();
    double best = 0.0;
    for (int idx : finest.net) {
      const VectorXd z = idx < 0 ? VectorXd::Zero(net.n) : scale.cloud[idx];
      best = std::max(best, d.dot(z));
    }
    VectorXd pd = dec.project(scale.k, d);
    out += best + scale.eps_min * pd.norm();
  }
  return out;
}

double knorm_closed_form(const ConvexBodyRep& body, const VectorXd& d) {
  switch (body.kind) {
    case BodyKind::EuclideanBall:
      return d.norm() / body.rho;
    case BodyKind::ScaledCube:
      return d.cwiseAbs().maxCoeff() / body.rho;
    default:
      throw InvalidInput("knorm_closed_form: no closed form for custom bodies");
  }
}

}  // namespace balance
