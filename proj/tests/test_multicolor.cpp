#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "balance/multicolor.hpp"
#include "balance/testsets.hpp"

using namespace balance;

namespace {

double l2(const VectorXd& v) { return v.norm(); }

VectorXd rand_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = gauss(rng);
  double nn = v.norm();
  return nn > 1e-12 ? VectorXd(v / nn) : VectorXd(VectorXd::Unit(n, 0));
}

}  // namespace

TEST_CASE("build_tree two equal colors") {
  auto tree = build_tree({1.0, 1.0}, 8.0);
  CHECK(tree.height == 1);
  CHECK(tree.beta == doctest::Approx(1.0 / 400));
  REQUIRE(tree.leaves.size() == 2);
  CHECK(tree.nodes[0].ql == doctest::Approx(0.5));
  CHECK(tree.nodes[0].qr == doctest::Approx(0.5));
  CHECK(tree.nodes[tree.leaves[0]].color == 0);
  CHECK(tree.nodes[tree.leaves[1]].color == 1);
}

TEST_CASE("build_tree three unit colors") {
  auto tree = build_tree({1.0, 1.0, 1.0}, 8.0);
  CHECK(tree.height == 2);
  REQUIRE(tree.leaves.size() == 3);
  // Bottom slot 3 removed; level-1 weights are {2, 1}, root walks 2/3 left.
  CHECK(tree.nodes[0].ql == doctest::Approx(2.0 / 3));
  CHECK(tree.nodes[0].qr == doctest::Approx(1.0 / 3));
  int right = tree.nodes[0].right;
  CHECK_FALSE(tree.nodes[right].is_binary());  // unary after removal
  CHECK(tree.nodes[right].weight == doctest::Approx(1.0));
}

TEST_CASE("build_tree weights (1, 5)") {
  auto tree = build_tree({1.0, 5.0}, 8.0);
  CHECK(tree.height == 3);       // M = 6 leaves
  REQUIRE(tree.leaves.size() == 6);
  REQUIRE(tree.color_leaves[0].size() == 1);
  REQUIRE(tree.color_leaves[1].size() == 5);
  for (int id : tree.color_leaves[1])
    CHECK(tree.nodes[id].leaf_weight == doctest::Approx(1.0));
  // Two removed slots, never siblings (validate would throw otherwise).
  CHECK_NOTHROW(tree.validate());
  CHECK(tree.nodes[0].weight == doctest::Approx(6.0));
}

TEST_CASE("build_tree rejects bad weights") {
  CHECK_THROWS_AS(build_tree({1.0}, 8.0), InvalidInput);
  CHECK_THROWS_AS(build_tree({0.5, 1.0}, 8.0), InvalidInput);
  CHECK_THROWS_AS(build_tree({1.0, 9.0}, 8.0), InvalidInput);
}

TEST_CASE("random trees pass all structural invariants") {
  auto rng = make_rng(17);
  std::uniform_real_distribution<double> wdist(1.0, 8.0);
  for (int trial = 0; trial < 50; ++trial) {
    int R = 2 + static_cast<int>(rng() % 15);
    std::vector<double> weights(R);
    for (double& w : weights) w = wdist(rng);
    auto tree = build_tree(weights, 8.0);
    CHECK_NOTHROW(tree.validate());
    // Walk coefficients bounded by the q range.
    for (size_t node = 0; node < tree.nodes.size(); ++node)
      for (int leaf : tree.leaves) {
        double x = walk_coefficient(tree, static_cast<int>(node), leaf);
        CHECK(std::abs(x) <= 19.0 / 20 + 1e-9);
      }
  }
}

TEST_CASE("walk_coefficient cases") {
  auto tree = build_tree({1.0, 1.0}, 8.0);
  int l = tree.leaves[0], r = tree.leaves[1];
  CHECK(walk_coefficient(tree, 0, l) == doctest::Approx(0.5));    // q^r
  CHECK(walk_coefficient(tree, 0, r) == doctest::Approx(-0.5));   // -q^l
  CHECK(walk_coefficient(tree, l, l) == 0.0);  // leaves are not binary
}

TEST_CASE("two unit colors reproduce the signed greedy trace") {
  const int n = 4;
  auto dec = identity_decomposition(n, 1);
  auto atoms = basis_testset(n);
  const double lambda = 0.05;
  auto tree = build_tree({1.0, 1.0}, 8.0);
  const double beta = tree.beta;
  MulticolorState mc(tree, dec, atoms, lambda);
  PotentialState ref(dec, atoms, lambda, PotentialVariant::Cosh);

  auto rng = make_rng(23);
  for (int t = 0; t < 100; ++t) {
    VectorXd v = rand_unit(rng, n);
    int color = mc.assign(v);
    int chi = ref.step((beta / 2.0) * v);
    CHECK(color == (chi > 0 ? 0 : 1));  // left subtree plays the + role
  }
  VectorXd diff = mc.node_difference(0);
  CHECK((diff - ref.discrepancy() / beta).norm() < 1e-9);
  CHECK((mc.node_difference_cached(0) - diff).norm() < 1e-9);
}

TEST_CASE("first arrival on a symmetric tree ties to the leftmost leaf") {
  const int n = 3;
  auto dec = identity_decomposition(n, 1);
  auto atoms = basis_testset(n);
  auto tree = build_tree({1.0, 1.0, 1.0, 1.0}, 8.0);  // full height-2 tree
  MulticolorState mc(tree, dec, atoms, 0.05);
  int leaf = mc.assign_leaf(VectorXd::Unit(n, 0));
  CHECK(leaf == mc.tree().leaves[0]);
  CHECK(mc.tree().nodes[leaf].color == 0);
}

TEST_CASE("color sums, conservation, and pairwise discrepancy") {
  const int n = 4;
  auto dec = identity_decomposition(n, 1);
  auto atoms = basis_testset(n);
  auto tree = build_tree({1.0, 2.5, 1.5}, 8.0);
  MulticolorState mc(tree, dec, atoms, 0.02);

  CHECK(mc.max_disc(l2) == doctest::Approx(0.0));

  auto rng = make_rng(31);
  VectorXd total = VectorXd::Zero(n);
  std::vector<VectorXd> per_color(3, VectorXd::Zero(n));
  for (int t = 0; t < 200; ++t) {
    VectorXd v = rand_unit(rng, n);
    int c = mc.assign(v);
    per_color[c] += v;
    total += v;
  }
  VectorXd sum = VectorXd::Zero(n);
  for (int c = 0; c < 3; ++c) {
    CHECK((mc.color_sum(c) - per_color[c]).norm() < 1e-9);
    CHECK((mc.color_sum_maximal(c) - per_color[c]).norm() < 1e-9);
    sum += mc.color_sum(c);
  }
  CHECK((sum - total).norm() < 1e-9);

  // Pairwise discrepancy against the definition.
  double w0 = 1.0, w1 = 2.5;
  VectorXd x = (per_color[0] / w0 - per_color[1] / w1) / (1.0 / w0 + 1.0 / w1);
  CHECK(mc.pairwise_disc(0, 1, l2) == doctest::Approx(x.norm()));
  CHECK(mc.max_disc(l2) >= mc.pairwise_disc(0, 1, l2) - 1e-12);
  CHECK_THROWS_AS(mc.pairwise_disc(1, 1, l2), InvalidInput);

  // Unit-weight sanity on a separate two-color run.
  auto tree2 = build_tree({1.0, 1.0}, 8.0);
  MulticolorState mc2(tree2, dec, atoms, 0.02);
  for (int t = 0; t < 50; ++t) mc2.assign(rand_unit(rng, n));
  VectorXd d01 = (mc2.color_sum(0) - mc2.color_sum(1)) / 2.0;
  CHECK(mc2.pairwise_disc(0, 1, l2) == doctest::Approx(d01.norm()));
}

TEST_CASE("cached node differences track the leaf recount") {
  const int n = 5;
  auto dec = identity_decomposition(n, 1);
  auto atoms = basis_testset(n);
  auto tree = build_tree({2.0, 1.0, 3.0, 1.5}, 8.0);
  MulticolorState mc(tree, dec, atoms, 0.02);
  auto rng = make_rng(41);
  for (int t = 0; t < 300; ++t) mc.assign(rand_unit(rng, n));
  for (size_t node = 0; node < mc.tree().nodes.size(); ++node) {
    if (!mc.tree().nodes[node].is_binary()) continue;
    VectorXd a = mc.node_difference(static_cast<int>(node));
    VectorXd b = mc.node_difference_cached(static_cast<int>(node));
    CHECK((a - b).norm() < 1e-9);
  }
  CHECK(mc.step_count() == 300);
  CHECK(mc.assignments().size() == 300);
}

TEST_CASE("drift probe") {
  const int n = 4;
  auto dec = identity_decomposition(n, 1);
  auto atoms = basis_testset(n);
  auto tree = build_tree({1.0, 2.0, 1.0}, 8.0);
  MulticolorState mc(tree, dec, atoms, 0.05);

  auto rng = make_rng(53);
  Sampler zero = [n](std::mt19937_64&) { return VectorXd(VectorXd::Zero(n)); };
  auto zs = mc.drift_probe(zero, 100, rng);
  CHECK(zs.greedy_mean == doctest::Approx(0.0));
  CHECK(zs.randomized_mean == doctest::Approx(0.0));

  for (int t = 0; t < 100; ++t) mc.assign(rand_unit(rng, n));
  Sampler unit = [n](std::mt19937_64& r) { return rand_unit(r, n); };
  auto st = mc.drift_probe(unit, 2000, rng);
  CHECK(st.greedy_mean <=
        st.randomized_mean + 3.0 * (st.greedy_stderr + st.randomized_stderr));
  CHECK_THROWS_AS(mc.drift_probe(unit, 0, rng), InvalidInput);
}
