#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "balance/potential.hpp"

namespace balance {

struct TreeNode {
  int level = 0;      // j, root at 0
  int pos = 0;        // k within the level of the full tree
  double weight = 0.0;
  int left = -1, right = -1, parent = -1;
  double ql = 0.0, qr = 0.0;  // walk probabilities (binary nodes)
  int color = -1;      // leaves only
  double leaf_weight = 0.0;
  int leaf_index = -1;  // left-to-right rank among surviving leaves
  bool is_leaf() const { return left < 0 && right < 0; }
  bool is_binary() const { return left >= 0 && right >= 0; }
};

// Balanced weighted binary tree over colors. Leaves of color c number
// floor(w_c), each of weight w_c/floor(w_c) in [1,2]; 2^h - M_l leaves of the
// full height-h tree are removed (every second from the right, never two
// siblings). Immutable once built.
struct ColorTree {
  int R = 0;
  std::vector<double> color_weights;
  int height = 0;
  double beta = 0.0;  // 1/(400h)
  std::vector<TreeNode> nodes;  // nodes[0] = root
  std::vector<int> leaves;      // node ids, left-to-right
  std::vector<std::vector<int>> color_leaves;    // per color, leaf node ids
  std::vector<std::vector<int>> maximal_nodes;   // per color, |M_c| <= 2h

  void validate() const;  // throws InvalidInput on violated invariants
};

ColorTree build_tree(const std::vector<double>& weights, double eta);

// X_{j,k}(l): q^r if leaf l lies in the node's left subtree, -q^l if right,
// 0 otherwise.
double walk_coefficient(const ColorTree& tree, int node, int leaf);

struct MulticolorDriftStats {
  double greedy_mean = 0.0;
  double greedy_stderr = 0.0;
  double randomized_mean = 0.0;  // random-walk leaf choice, paired draws
  double randomized_stderr = 0.0;
};

// Psi = sum over binary nodes of Phi(beta * d^-_{j,k}); greedy leaf choice.
class MulticolorState {
 public:
  MulticolorState(ColorTree tree, const ScaleDecomposition& dec,
                  TestDistribution atoms, double lambda,
                  PotentialVariant variant = PotentialVariant::Cosh);

  // Greedy assignment; returns the chosen color. Ties -> smallest leaf index.
  int assign(const VectorXd& v);
  int assign_leaf(const VectorXd& v);  // same, returning the leaf id

  double psi() const;
  double delta_for_leaf(const VectorXd& v, int leaf) const;

  VectorXd color_sum(int c) const;          // from leaf sums
  VectorXd color_sum_maximal(int c) const;  // from maximal nodes, cross-check
  VectorXd node_difference(int node) const;  // d^-_{j,k} recomputed from leaves
  VectorXd node_difference_cached(int node) const;

  double pairwise_disc(int c1, int c2, const NormFn& norm) const;
  double max_disc(const NormFn& norm) const;

  MulticolorDriftStats drift_probe(const Sampler& sampler, int m,
                                   std::mt19937_64& rng) const;

  const ColorTree& tree() const { return tree_; }
  long step_count() const { return t_; }
  const std::vector<std::pair<long, int>>& assignments() const { return log_; }

 private:
  ColorTree tree_;
  const ScaleDecomposition* dec_;
  std::vector<std::unique_ptr<PotentialState>> node_potentials_;  // binary only
  std::vector<VectorXd> leaf_sums_;  // indexed by leaf rank
  VectorXd total_;
  long t_ = 0;
  std::vector<std::pair<long, int>> log_;  // (t, leaf id)
};

}  // namespace balance
