#include "balance/multicolor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace balance {

namespace {

// Colors present in the node's subtree.
void subtree_colors(const ColorTree& tree, int node, std::set<int>& out) {
  const TreeNode& nd = tree.nodes[node];
  if (nd.is_leaf()) {
    out.insert(nd.color);
    return;
  }
  if (nd.left >= 0) subtree_colors(tree, nd.left, out);
  if (nd.right >= 0) subtree_colors(tree, nd.right, out);
}

void collect_leaves(const ColorTree& tree, int node, std::vector<int>& out) {
  const TreeNode& nd = tree.nodes[node];
  if (nd.is_leaf()) {
    out.push_back(node);
    return;
  }
  if (nd.left >= 0) collect_leaves(tree, nd.left, out);
  if (nd.right >= 0) collect_leaves(tree, nd.right, out);
}

}  // namespace

ColorTree build_tree(const std::vector<double>& weights, double eta) {
  const int R = static_cast<int>(weights.size());
  if (R < 2) throw InvalidInput("build_tree: need at least two colors");
  for (double w : weights)
    if (w < 1.0 - 1e-9 || w > eta + 1e-9)
      throw InvalidInput("build_tree: color weight outside [1, eta]");

  ColorTree tree;
  tree.R = R;
  tree.color_weights = weights;

  struct LeafSpec { int color; double weight; };
  std::vector<LeafSpec> leaf_specs;
  for (int c = 0; c < R; ++c) {
    int m = std::max(1, static_cast<int>(std::floor(weights[c] + 1e-9)));
    for (int i = 0; i < m; ++i) leaf_specs.push_back({c, weights[c] / m});
  }
  const int M = static_cast<int>(leaf_specs.size());
  int h = 0;
  while ((1 << h) < M) ++h;
  h = std::max(h, 1);
  tree.height = h;
  tree.beta = 1.0 / (400.0 * h);

  // Remove every second slot counting from the right end of the bottom level:
  // all removed slots are right children of distinct parents.
  const int slots = 1 << h;
  std::vector<bool> removed(slots, false);
  for (int i = 0; i < slots - M; ++i) removed[slots - 1 - 2 * i] = true;

  tree.leaves.clear();
  int next_leaf = 0;
  // Recursive construction over the full tree's (level, pos) grid.
  std::function<int(int, int, int)> build = [&](int level, int pos, int parent) -> int {
    if (level == h) {
      if (removed[pos]) return -1;
      TreeNode leaf;
      leaf.level = level;
      leaf.pos = pos;
      leaf.parent = parent;
      leaf.color = leaf_specs[next_leaf].color;
      leaf.leaf_weight = leaf_specs[next_leaf].weight;
      leaf.weight = leaf.leaf_weight;
      leaf.leaf_index = next_leaf;
      ++next_leaf;
      int id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(leaf);
      tree.leaves.push_back(id);
      return id;
    }
    TreeNode node;
    node.level = level;
    node.pos = pos;
    node.parent = parent;
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    int l = build(level + 1, 2 * pos, id);
    int r = build(level + 1, 2 * pos + 1, id);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    double w = 0.0;
    if (l >= 0) w += tree.nodes[l].weight;
    if (r >= 0) w += tree.nodes[r].weight;
    tree.nodes[id].weight = w;
    if (l >= 0 && r >= 0) {
      tree.nodes[id].ql = tree.nodes[l].weight / w;
      tree.nodes[id].qr = tree.nodes[r].weight / w;
    } else {
      tree.nodes[id].ql = l >= 0 ? 1.0 : 0.0;
      tree.nodes[id].qr = r >= 0 ? 1.0 : 0.0;
    }
    return id;
  };
  build(0, 0, -1);

  tree.color_leaves.assign(R, {});
  for (int id : tree.leaves)
    tree.color_leaves[tree.nodes[id].color].push_back(id);

  // Maximal single-color nodes: monochromatic with a non-monochromatic
  // (or absent) parent.
  tree.maximal_nodes.assign(R, {});
  for (int id = 0; id < static_cast<int>(tree.nodes.size()); ++id) {
    std::set<int> cols;
    subtree_colors(tree, id, cols);
    if (cols.size() != 1) continue;
    int c = *cols.begin();
    int p = tree.nodes[id].parent;
    bool parent_mono = false;
    if (p >= 0) {
      std::set<int> pc;
      subtree_colors(tree, p, pc);
      parent_mono = pc.size() == 1;
    }
    if (!parent_mono) tree.maximal_nodes[c].push_back(id);
  }
  tree.validate();
  return tree;
}

void ColorTree::validate() const {
  int M = 0;
  for (double w : color_weights) M += static_cast<int>(std::floor(w + 1e-9));
  if (static_cast<int>(leaves.size()) != M)
    throw InvalidInput("color tree: leaf count mismatch");
  if ((1 << height) < M || (height > 1 && (1 << (height - 1)) >= M))
    throw InvalidInput("color tree: height not minimal");

  double root_w = nodes[0].weight;
  double total = 0.0;
  for (double w : color_weights) total += w;
  if (std::abs(root_w - total) > 1e-9)
    throw InvalidInput("color tree: root weight mismatch");

  // Removed bottom slots: reconstruct and refuse sibling removals.
  std::vector<bool> present(1 << height, false);
  for (int id : leaves) present[nodes[id].pos] = true;
  for (int p = 0; p < (1 << (height - 1)); ++p)
    if (!present[2 * p] && !present[2 * p + 1])
      throw InvalidInput("color tree: sibling leaves removed");

  int last_color = -1;
  for (int id : leaves) {
    const TreeNode& leaf = nodes[id];
    if (leaf.leaf_weight < 1.0 - 1e-9 || leaf.leaf_weight > 2.0 + 1e-9)
      throw InvalidInput("color tree: leaf weight outside [1,2]");
    if (leaf.color < last_color)
      throw InvalidInput("color tree: same-color leaves not consecutive");
    last_color = leaf.color;
  }

  std::map<int, std::vector<double>> level_weights;
  for (const TreeNode& nd : nodes) level_weights[nd.level].push_back(nd.weight);
  for (const auto& [lvl, ws] : level_weights) {
    double lo = *std::min_element(ws.begin(), ws.end());
    double hi = *std::max_element(ws.begin(), ws.end());
    if (hi > 4.0 * lo + 1e-9)
      throw InvalidInput("color tree: level balance violated");
  }

  for (const TreeNode& nd : nodes) {
    if (!nd.is_binary()) continue;
    if (std::abs(nd.ql + nd.qr - 1.0) > 1e-12)
      throw InvalidInput("color tree: walk probabilities do not sum to 1");
    if (nd.ql < 1.0 / 20 - 1e-9 || nd.ql > 19.0 / 20 + 1e-9)
      throw InvalidInput("color tree: walk probability outside [1/20, 19/20]");
  }

  for (int c = 0; c < R; ++c)
    if (static_cast<int>(maximal_nodes[c].size()) > 2 * height)
      throw InvalidInput("color tree: too many maximal nodes");
}

double walk_coefficient(const ColorTree& tree, int node, int leaf) {
  const TreeNode& nd = tree.nodes[node];
  if (!nd.is_binary()) return 0.0;
  int cur = leaf;
  while (cur >= 0) {
    int p = tree.nodes[cur].parent;
    if (p == node) return cur == nd.left ? nd.qr : -nd.ql;
    cur = p;
  }
  return 0.0;
}

MulticolorState::MulticolorState(ColorTree tree, const ScaleDecomposition& dec,
                                 TestDistribution atoms, double lambda,
                                 PotentialVariant variant)
    : tree_(std::move(tree)), dec_(&dec) {
  node_potentials_.resize(tree_.nodes.size());
  for (size_t i = 0; i < tree_.nodes.size(); ++i)
    if (tree_.nodes[i].is_binary())
      node_potentials_[i] =
          std::make_unique<PotentialState>(dec, atoms, lambda, variant);
  leaf_sums_.assign(tree_.leaves.size(), VectorXd::Zero(dec.n));
  total_ = VectorXd::Zero(dec.n);
}

double MulticolorState::delta_for_leaf(const VectorXd& v, int leaf) const {
  double delta = 0.0;
  int cur = leaf;
  while (cur >= 0) {
    int p = tree_.nodes[cur].parent;
    if (p >= 0 && node_potentials_[p]) {
      const TreeNode& pn = tree_.nodes[p];
      double x = (cur == pn.left) ? pn.qr : -pn.ql;
      delta += node_potentials_[p]->delta_for_step(v, tree_.beta * x);
    }
    cur = p;
  }
  return delta;
}

int MulticolorState::assign_leaf(const VectorXd& v) {
  int best_leaf = -1;
  double best = 0.0;
  for (int id : tree_.leaves) {  // leaves are in leaf-index order
    double delta = delta_for_leaf(v, id);
    if (best_leaf < 0 || delta < best - 1e-12) {
      best_leaf = id;
      best = delta;
    }
  }
  // Commit: update every binary ancestor of the chosen leaf.
  int cur = best_leaf;
  while (cur >= 0) {
    int p = tree_.nodes[cur].parent;
    if (p >= 0 && node_potentials_[p]) {
      const TreeNode& pn = tree_.nodes[p];
      double x = (cur == pn.left) ? pn.qr : -pn.ql;
      node_potentials_[p]->apply_step(v, tree_.beta * x);
    }
    cur = p;
  }
  leaf_sums_[tree_.nodes[best_leaf].leaf_index] += v;
  total_ += v;
  ++t_;
  log_.emplace_back(t_, best_leaf);
  return best_leaf;
}

int MulticolorState::assign(const VectorXd& v) {
  return tree_.nodes[assign_leaf(v)].color;
}

double MulticolorState::psi() const {
  double out = 0.0;
  for (const auto& ps : node_potentials_)
    if (ps) out += ps->potential();
  return out;
}

VectorXd MulticolorState::color_sum(int c) const {
  VectorXd out = VectorXd::Zero(total_.size());
  for (int id : tree_.color_leaves[c])
    out += leaf_sums_[tree_.nodes[id].leaf_index];
  return out;
}

VectorXd MulticolorState::color_sum_maximal(int c) const {
  VectorXd out = VectorXd::Zero(total_.size());
  for (int node : tree_.maximal_nodes[c]) {
    std::vector<int> ls;
    collect_leaves(tree_, node, ls);
    for (int id : ls) out += leaf_sums_[tree_.nodes[id].leaf_index];
  }
  return out;
}

VectorXd MulticolorState::node_difference(int node) const {
  const TreeNode& nd = tree_.nodes[node];
  VectorXd out = VectorXd::Zero(total_.size());
  if (!nd.is_binary()) return out;
  std::vector<int> ls;
  collect_leaves(tree_, nd.left, ls);
  for (int id : ls) out += nd.qr * leaf_sums_[tree_.nodes[id].leaf_index];
  ls.clear();
  collect_leaves(tree_, nd.right, ls);
  for (int id : ls) out -= nd.ql * leaf_sums_[tree_.nodes[id].leaf_index];
  return out;
}

VectorXd MulticolorState::node_difference_cached(int node) const {
  if (!node_potentials_[node]) return VectorXd::Zero(total_.size());
  return node_potentials_[node]->discrepancy() / tree_.beta;
}

double MulticolorState::pairwise_disc(int c1, int c2, const NormFn& norm) const {
  if (c1 == c2) throw InvalidInput("pairwise_disc: colors must differ");
  double w1 = tree_.color_weights[c1], w2 = tree_.color_weights[c2];
  VectorXd x = (color_sum(c1) / w1 - color_sum(c2) / w2) / (1.0 / w1 + 1.0 / w2);
  return norm(x);
}

double MulticolorState::max_disc(const NormFn& norm) const {
  double best = 0.0;
  for (int c1 = 0; c1 < tree_.R; ++c1)
    for (int c2 = c1 + 1; c2 < tree_.R; ++c2)
      best = std::max(best, pairwise_disc(c1, c2, norm));
  return best;
}

MulticolorDriftStats MulticolorState::drift_probe(const Sampler& sampler, int m,
                                                  std::mt19937_64& rng) const {
  if (m < 1) throw InvalidInput("drift_probe: m >= 1");
  double gs = 0.0, gss = 0.0, rs = 0.0, rss = 0.0;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    VectorXd v = sampler(rng);
    double greedy = std::numeric_limits<double>::infinity();
    for (int id : tree_.leaves) greedy = std::min(greedy, delta_for_leaf(v, id));
    // Random walk from the root using the q probabilities.
    int cur = 0;
    while (!tree_.nodes[cur].is_leaf()) {
      const TreeNode& nd = tree_.nodes[cur];
      if (nd.left < 0) cur = nd.right;
      else if (nd.right < 0) cur = nd.left;
      else cur = uni(rng) < nd.ql ? nd.left : nd.right;
    }
    double randomized = delta_for_leaf(v, cur);
    gs += greedy; gss += greedy * greedy;
    rs += randomized; rss += randomized * randomized;
  }
  MulticolorDriftStats out;
  out.greedy_mean = gs / m;
  out.randomized_mean = rs / m;
  out.greedy_stderr = std::sqrt(std::max(0.0, gss / m - out.greedy_mean * out.greedy_mean) / m);
  out.randomized_stderr =
      std::sqrt(std::max(0.0, rss / m - out.randomized_mean * out.randomized_mean) / m);
  return out;
}

}  // namespace balance
