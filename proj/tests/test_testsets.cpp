#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "balance/testsets.hpp"

using namespace balance;

namespace {

std::vector<VectorXd> layer_points(const ChainingScale& scale, const ChainingLayer& layer,
                                   int n) {
  std::vector<VectorXd> out;
  for (int idx : layer.net)
    out.push_back(idx < 0 ? VectorXd(VectorXd::Zero(n)) : scale.cloud[idx]);
  return out;
}

double total_weight(const TestDistribution& d) {
  double w = 0.0;
  for (const TestAtom& a : d) w += a.weight;
  return w;
}

}  // namespace

TEST_CASE("basis_testset") {
  auto ts = basis_testset(3);
  REQUIRE(ts.size() == 3);
  for (const TestAtom& a : ts) {
    CHECK(a.weight == doctest::Approx(1.0 / 3));
    CHECK(a.vec.norm() == doctest::Approx(1.0));
  }
  CHECK(ts[0].vec.dot(ts[1].vec) == doctest::Approx(0.0));
  CHECK(ts[1].vec.dot(ts[2].vec) == doctest::Approx(0.0));
}

TEST_CASE("eigen_testset on a diagonal covariance") {
  MatrixXd sigma = MatrixXd::Zero(3, 3);
  sigma.diagonal() << 0.5, 0.25, 0.125;
  auto dec = dyadic_reduce(covariance_from_matrix(sigma), 8);
  auto ts = eigen_testset(dec);
  REQUIRE(ts.size() == 3);
  for (const TestAtom& a : ts) {
    CHECK(a.weight == doctest::Approx(1.0 / 3));
    CHECK(a.vec.norm() == doctest::Approx(1.0));
    CHECK(a.vec.cwiseAbs().maxCoeff() == doctest::Approx(1.0));  // basis vectors
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      CHECK(std::abs(ts[i].vec.dot(ts[j].vec)) < 1e-9);
}

TEST_CASE("komlos_mixture splits mass evenly") {
  auto pool = basis_testset(4);  // stands in for a pool of 4 atoms
  auto ts = basis_testset(2);
  TestDistribution pool2;
  for (auto& a : pool) {
    VectorXd v = VectorXd::Zero(2);
    v(0) = a.vec(0);
    pool2.push_back({v, a.weight, AtomTag::InputSurrogate});
  }
  auto mix = komlos_mixture(pool2, ts);
  REQUIRE(mix.size() == 6);
  CHECK(mix[0].weight == doctest::Approx(1.0 / 8));  // 1/(2m), m = 4
  CHECK(mix[4].weight == doctest::Approx(1.0 / 4));  // 1/(2n), n = 2
  CHECK(total_weight(mix) == doctest::Approx(1.0));
  CHECK_THROWS_AS(komlos_mixture(pool2, {}), InvalidInput);
}

TEST_CASE("banaszczyk_mixture weights and chaining layer shares") {
  // Synthetic net: one scale, layers at eps = 1 and eps = 1/2, one edge each.
  ChainingNet net;
  net.n = 2;
  net.lambda = 0.01;
  ChainingScale scale;
  scale.k = 1;
  scale.eps_min = 0.5;
  VectorXd p0 = VectorXd::Zero(2), p1(2), p2(2);
  p1 << 0.9, 0.0;
  p2 << 0.9, 0.4;
  scale.cloud = {p0, p1, p2};
  ChainingLayer l0;
  l0.ell = 0;
  l0.eps = 1.0;
  l0.raw_weight = std::exp2(-2.0);
  l0.net = {-1};
  l0.edges = {{0, 1}};
  ChainingLayer l1;
  l1.ell = 1;
  l1.eps = 0.5;
  l1.raw_weight = std::exp2(-8.0);
  l1.net = {1};
  l1.edges = {{0, 2}};
  scale.layers = {l0, l1};
  net.scales.push_back(scale);

  auto chain = chaining_testset(net);
  REQUIRE(chain.size() == 4);  // 2 edges, symmetrized
  // Layer shares 2^-2/(2^-2+2^-8) and 2^-8/(2^-2+2^-8).
  double share0 = chain[0].weight + chain[1].weight;
  double share1 = chain[2].weight + chain[3].weight;
  CHECK(share0 == doctest::Approx(0.98462).epsilon(1e-4));
  CHECK(share1 == doctest::Approx(0.015385).epsilon(1e-4));
  CHECK(total_weight(chain) == doctest::Approx(1.0));
  // r^2-scaled edge of length <= eps has length <= 1/eps.
  CHECK(chain[0].vec.norm() <= 1.0 / l0.eps + 1e-9);
  CHECK(chain[2].vec.norm() <= 1.0 / l1.eps + 1e-9);
  // Edge at eps=1/2 scaled by r^2 = 4.
  CHECK(chain[2].vec.norm() == doctest::Approx(4.0 * (p2 - p1).norm()));

  auto pool = basis_testset(2);
  auto eig = basis_testset(2);
  auto mix = banaszczyk_mixture(pool, eig, chain);
  CHECK(total_weight(mix) == doctest::Approx(1.0));
  double pool_mass = 0.0, eigen_mass = 0.0, chain_mass = 0.0;
  for (const TestAtom& a : mix) {
    if (a.tag == AtomTag::ChainingEdge) chain_mass += a.weight;
    else if (a.tag == AtomTag::Eigen) eigen_mass += a.weight;
    else pool_mass += a.weight;
  }
  CHECK(pool_mass + eigen_mass == doctest::Approx(0.75));  // basis tags overlap
  CHECK(chain_mass == doctest::Approx(0.25));
}

TEST_CASE("build_body gamma estimates match analytic values") {
  // n=1 ball, rho=1: gamma = erf(1/sqrt(2)) ~ 0.6827.
  auto b1 = build_body(BodyKind::EuclideanBall, 1, 3);
  CHECK(b1.gamma.value == doctest::Approx(0.6827).epsilon(0.02));
  // n=4 ball, rho=2: gamma = P(chi^2_4 <= 4) = 1 - 3e^-2 ~ 0.5940.
  auto b4 = build_body(BodyKind::EuclideanBall, 4, 3);
  CHECK(b4.gamma.value == doctest::Approx(1.0 - 3.0 * std::exp(-2.0)).epsilon(0.02));
  // Degenerate stub: empty polar cloud represents K = R^n, gamma = 1.
  auto ball = custom_body(3, {}, 5);
  CHECK(ball.gamma.value == doctest::Approx(1.0));
}

TEST_CASE("build_body polar condition and diameter") {
  for (auto kind : {BodyKind::EuclideanBall, BodyKind::ScaledCube}) {
    auto body = build_body(kind, 4, 9, 512);
    auto rng = make_rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double diam = 0.0;
    for (const VectorXd& y : body.polar_cloud) diam = std::max(diam, 2.0 * y.norm());
    CHECK(diam <= 4.0 + 1e-9);
    for (int i = 0; i < 2000; ++i) {
      VectorXd x(4);
      if (kind == BodyKind::EuclideanBall) {
        for (int j = 0; j < 4; ++j) x(j) = gauss(rng);
        x *= body.rho * std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 0.25) /
             x.norm();
      } else {
        for (int j = 0; j < 4; ++j) x(j) = body.rho * uni(rng);
      }
      for (const VectorXd& y : body.polar_cloud)
        CHECK(std::abs(x.dot(y)) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("covering_check") {
  VectorXd a(1), b(1), c(1);
  a << 0.0;
  b << 0.9;
  c << 2.0;
  CHECK(covering_check({a, b}, {a, b}, 0.1));  // net = cloud
  CHECK_FALSE(covering_check({a}, {c}, 1.0));  // point at 2*eps
  std::vector<VectorXd> grid;
  for (int i = 0; i < 100; ++i) {
    VectorXd p(1);
    p << i / 99.0;
    grid.push_back(p);
  }
  CHECK(covering_check({a, b}, grid, 1.0));
}

TEST_CASE("sudakov_bound") {
  CHECK(sudakov_bound(1.5, 1.0) == doctest::Approx(std::exp(9.0)));
  CHECK(sudakov_bound(1.5, 1.0) == doctest::Approx(8103.08).epsilon(1e-4));
  CHECK(sudakov_bound(1.5, 3.0) == doctest::Approx(std::exp(1.0)));
  CHECK(sudakov_bound(1.5, 1e9) == doctest::Approx(1.0));
}

TEST_CASE("chaining net on a 1-D grid cloud") {
  // Exhaustive covering oracle on a 10^3-point grid over [-4, 4].
  ConvexBodyRep body;
  body.kind = BodyKind::CustomPolarCloud;
  body.n = 1;
  for (int i = 0; i < 1000; ++i) {
    VectorXd p(1);
    p << -4.0 + 8.0 * i / 999.0;
    body.polar_cloud.push_back(p);
  }
  auto dec = identity_decomposition(1, 1);
  auto net = build_chaining_net(body, dec, 0.025);
  REQUIRE(net.scales.size() == 1);
  const ChainingScale& scale = net.scales[0];
  CHECK(scale.diam == doctest::Approx(8.0));
  CHECK(scale.doubling_layer);
  // Coarsest layer is the single origin vertex and covers at its own eps.
  REQUIRE(scale.layers.front().net.size() == 1);
  CHECK(scale.layers.front().net[0] == -1);
  const int n = 1;
  bool saw_eps1 = false;
  for (const ChainingLayer& layer : scale.layers) {
    auto pts = layer_points(scale, layer, n);
    CHECK(covering_check(pts, scale.cloud, layer.eps));
    if (layer.eps == doctest::Approx(1.0)) {
      saw_eps1 = true;
      CHECK(pts.size() <= 9);
    }
    // Every edge no longer than the layer resolution.
    for (const auto& [ci, fi] : layer.edges) {
      VectorXd coarse = layer.net[ci] < 0 ? VectorXd::Zero(n) : scale.cloud[layer.net[ci]];
      CHECK((scale.cloud[fi] - coarse).norm() <= layer.eps + 1e-9);
    }
    if (layer.eps <= 1.0) {
      double log_edges = std::log2(double(std::max<size_t>(layer.edges.size(), 1)));
      CHECK(log_edges <= 16.0 / (layer.eps * layer.eps) + 1e-9);
    }
  }
  CHECK(saw_eps1);
}

TEST_CASE("chaining net layers and admissible cap on a ball") {
  auto body = build_body(BodyKind::EuclideanBall, 4, 13, 512);
  auto dec = identity_decomposition(4, 2);
  double lambda = 1e-3;
  auto net = build_chaining_net(body, dec, lambda, 4L * 10000L);
  REQUIRE(net.scales.size() == 1);
  const ChainingScale& scale = net.scales[0];
  int max_layers = static_cast<int>(2.0 * std::log2(4.0 * 10000.0));
  CHECK(static_cast<int>(scale.layers.size()) <= max_layers);
  for (const ChainingLayer& layer : scale.layers) {
    auto pts = layer_points(scale, layer, 4);
    CHECK(covering_check(pts, scale.cloud, layer.eps));
  }
  // eps_min from the spec formula (before any truncation adjustment).
  if (!scale.truncated) {
    int expected = static_cast<int>(
        std::ceil(std::log2(std::sqrt(4.0) / (10.0 * lambda))));
    CHECK(scale.eps_min == doctest::Approx(std::ldexp(1.0, -expected)));
  }
}

TEST_CASE("knorm against the ball closed form") {
  auto body = build_body(BodyKind::EuclideanBall, 2, 4);  // rho = sqrt(2)
  auto dec = identity_decomposition(2, 1);
  auto net = build_chaining_net(body, dec, 1e-3);

  VectorXd zero = VectorXd::Zero(2);
  CHECK(knorm(body, net, dec, zero) == doctest::Approx(0.0));

  VectorXd d(2);
  d << 3.0, 4.0;
  double closed = knorm_closed_form(body, d);
  CHECK(closed == doctest::Approx(5.0 / std::sqrt(2.0)));
  CHECK(closed == doctest::Approx(3.5355).epsilon(1e-4));
  double via_net = knorm(body, net, dec, d);
  CHECK(via_net == doctest::Approx(closed).epsilon(0.10));

  // Subadditivity (exact for the net formula; slack tolerance only).
  auto rng = make_rng(2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    VectorXd d1(2), d2(2);
    d1 << gauss(rng), gauss(rng);
    d2 << gauss(rng), gauss(rng);
    CHECK(knorm(body, net, dec, d1 + d2) <=
          knorm(body, net, dec, d1) + knorm(body, net, dec, d2) + 1e-9);
  }
}

TEST_CASE("rejected body: custom cloud forcing small gamma") {
  // Polar points of norm 4 make K roughly a 1/4-ball: gamma well below 1/2.
  std::vector<VectorXd> cloud;
  for (int i = 0; i < 8; ++i) {
    VectorXd y(2);
    double a = i * M_PI / 4.0;
    y << 4.0 * std::cos(a), 4.0 * std::sin(a);
    cloud.push_back(y);
  }
  CHECK_THROWS_AS(custom_body(2, cloud, 7), InvalidInput);
}
