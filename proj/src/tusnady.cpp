#include "balance/tusnady.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "balance/harness.hpp"

namespace balance {

namespace {

int checked_log2(int T) {
  if (T < 2 || (T & (T - 1)) != 0) throw InvalidInput("tusnady: T must be a power of two");
  int L = 0;
  while ((1 << L) < T) ++L;
  return L;
}

void check_dim(int d) {
  if (d < 1 || d > kMaxTusnadyDim) throw InvalidInput("tusnady: d must be in [1,3]");
}

}  // namespace

bool DyadicBox::contains(const Point& x) const {
  for (int i = 0; i < d; ++i) {
    double lo = std::ldexp(static_cast<double>(offset[i]), -level[i]);
    double hi = std::ldexp(static_cast<double>(offset[i] + 1), -level[i]);
    if (x[i] < lo || x[i] >= hi) return false;
  }
  return true;
}

double DyadicBox::volume() const {
  double v = 1.0;
  for (int i = 0; i < d; ++i) v *= std::ldexp(1.0, -level[i]);
  return v;
}

uint64_t DyadicBox::key() const {
  uint64_t k = 0;
  for (int i = 0; i < d; ++i)
    k = (k << 21) | (static_cast<uint64_t>(level[i]) << 16) |
        static_cast<uint64_t>(offset[i]);
  return k;
}

double Cdf::operator()(double x) const {
  if (fn) return fn(x);
  if (sample.empty()) throw InvalidInput("cdf: empty table");
  auto it = std::upper_bound(sample.begin(), sample.end(), x);
  return static_cast<double>(it - sample.begin()) / sample.size();
}

Cdf empirical_cdf(std::vector<double> sample) {
  if (sample.empty()) throw InvalidInput("empirical_cdf: empty sample");
  std::sort(sample.begin(), sample.end());
  Cdf c;
  c.sample = std::move(sample);
  return c;
}

Point cdf_transform(const Point& x, const std::vector<Cdf>& marginals) {
  if (x.size() != marginals.size()) throw InvalidInput("cdf_transform: dimension mismatch");
  Point out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = marginals[i](x[i]);
    if (out[i] < 0.0 || out[i] > 1.0) throw InvalidInput("cdf_transform: CDF out of [0,1]");
  }
  return out;
}

SparsePointVector dyadic_boxes_for_point(const Point& x, int T, int d) {
  check_dim(d);
  int L = checked_log2(T);
  if (static_cast<int>(x.size()) != d) throw InvalidInput("dyadic_boxes_for_point: bad point");
  for (int i = 0; i < d; ++i)
    if (x[i] < 0.0 || x[i] > 1.0) throw InvalidInput("dyadic_boxes_for_point: point outside [0,1]^d");

  // Offsets of the containing interval per dimension and level; x_i = 1 maps
  // to the last interval.
  std::array<std::array<int, 17>, kMaxTusnadyDim> off{};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= L; ++j)
      off[i][j] = std::min(static_cast<int>(std::floor(std::ldexp(x[i], j))), (1 << j) - 1);

  SparsePointVector out;
  std::array<int, kMaxTusnadyDim> lv{};
  while (true) {
    DyadicBox b;
    b.d = d;
    for (int i = 0; i < d; ++i) {
      b.level[i] = lv[i];
      b.offset[i] = off[i][lv[i]];
    }
    out.push_back(b);
    int i = 0;
    for (; i < d; ++i) {
      if (lv[i] < L) { ++lv[i]; break; }
      lv[i] = 0;
    }
    if (i == d) break;
  }
  return out;
}

bool GridBox::contains(const Point& x, int T) const {
  for (int i = 0; i < d; ++i) {
    double a = static_cast<double>(lo[i]) / T, b = static_cast<double>(hi[i]) / T;
    if (x[i] < a || x[i] >= b) return false;
  }
  return true;
}

long GridBox::cells(int) const {
  long c = 1;
  for (int i = 0; i < d; ++i) c *= (hi[i] - lo[i]);
  return c;
}

std::vector<DyadicBox> minimal_dyadic_cover_1d(int lo, int hi, int T) {
  int L = checked_log2(T);
  if (lo < 0 || hi > T || lo >= hi) throw InvalidInput("minimal_dyadic_cover_1d: bad interval");
  std::vector<DyadicBox> out;
  int p = lo;
  while (p < hi) {
    int align = (p == 0) ? T : (p & -p);
    int len = 1;
    while (len * 2 <= hi - p && len * 2 <= align) len *= 2;
    if (len > align) len = align;
    DyadicBox b;
    b.d = 1;
    int j = L;
    while ((1 << (L - j)) < len) --j;  // len = 2^(L-j)
    b.level[0] = j;
    b.offset[0] = p / len;
    out.push_back(b);
    p += len;
  }
  return out;
}

std::vector<DyadicBox> minimal_dyadic_cover(const GridBox& box, int T) {
  check_dim(box.d);
  std::array<std::vector<DyadicBox>, kMaxTusnadyDim> per_dim;
  for (int i = 0; i < box.d; ++i)
    per_dim[i] = minimal_dyadic_cover_1d(box.lo[i], box.hi[i], T);
  std::vector<DyadicBox> out;
  std::array<size_t, kMaxTusnadyDim> idx{};
  while (true) {
    DyadicBox b;
    b.d = box.d;
    for (int i = 0; i < box.d; ++i) {
      b.level[i] = per_dim[i][idx[i]].level[0];
      b.offset[i] = per_dim[i][idx[i]].offset[0];
    }
    out.push_back(b);
    int i = 0;
    for (; i < box.d; ++i) {
      if (++idx[i] < per_dim[i].size()) break;
      idx[i] = 0;
    }
    if (i == box.d) break;
  }
  return out;
}

std::vector<TestBox> dyadic_generated_testset(int T, int d, int budget, uint64_t seed) {
  check_dim(d);
  checked_log2(T);
  if (budget < 1) throw InvalidInput("dyadic_generated_testset: budget >= 1");

  double intervals = 0.5 * T * (T + 1.0);
  double total = std::pow(intervals, d);
  std::vector<TestBox> out;
  auto push = [&](const GridBox& g) {
    out.push_back({g, minimal_dyadic_cover(g, T)});
  };
  if (total <= budget) {
    std::array<int, kMaxTusnadyDim> lo{}, hi{};
    std::function<void(int)> rec = [&](int i) {
      if (i == d) {
        GridBox g;
        g.d = d;
        g.lo = lo;
        g.hi = hi;
        push(g);
        return;
      }
      for (lo[i] = 0; lo[i] < T; ++lo[i])
        for (hi[i] = lo[i] + 1; hi[i] <= T; ++hi[i]) rec(i + 1);
    };
    rec(0);
  } else {
    auto rng = make_rng(splitmix64(seed ^ 0x74657374ULL));
    std::uniform_int_distribution<int> pick(0, T);
    std::set<std::array<long, 2 * kMaxTusnadyDim>> seen;
    int attempts = 0;
    while (static_cast<int>(out.size()) < budget && attempts < budget * 50) {
      ++attempts;
      GridBox g;
      g.d = d;
      bool ok = true;
      std::array<long, 2 * kMaxTusnadyDim> sig{};
      for (int i = 0; i < d; ++i) {
        int a = pick(rng), b = pick(rng);
        if (a == b) { ok = false; break; }
        g.lo[i] = std::min(a, b);
        g.hi[i] = std::max(a, b);
        sig[2 * i] = g.lo[i];
        sig[2 * i + 1] = g.hi[i];
      }
      if (!ok || !seen.insert(sig).second) continue;
      push(g);
    }
  }
  return out;
}

bool RealBox::contains(const Point& x) const {
  for (int i = 0; i < d; ++i)
    if (x[i] < lo[i] || x[i] >= hi[i]) return false;
  return true;
}

double RealBox::volume() const {
  double v = 1.0;
  for (int i = 0; i < d; ++i) v *= std::max(0.0, hi[i] - lo[i]);
  return v;
}

BoxDecomposition box_decompose(const RealBox& box, int T, int d) {
  check_dim(d);
  checked_log2(T);
  BoxDecomposition out;
  RealBox cur = box;
  for (int i = 0; i < d; ++i) {
    if (cur.lo[i] >= cur.hi[i]) { out.core_empty = true; break; }
    long a = static_cast<long>(std::ceil(cur.lo[i] * T - 1e-9));
    long b = static_cast<long>(std::floor(cur.hi[i] * T + 1e-9));
    if (a >= b) {
      // No aligned core in this dimension. The remaining box either fits in a
      // single width-1/T stripe or crosses exactly one grid line (a == b);
      // split there so every piece stays inside one stripe.
      double s = static_cast<double>(a) / T;
      if (a == b && cur.lo[i] < s - 1e-15 && cur.hi[i] > s + 1e-15) {
        RealBox left = cur, right = cur;
        left.hi[i] = s;
        right.lo[i] = s;
        out.stripes.push_back(left);
        out.stripes.push_back(right);
      } else {
        out.stripes.push_back(cur);
      }
      out.core_empty = true;
      cur.lo[i] = cur.hi[i];
      break;
    }
    double snap_lo = static_cast<double>(a) / T;
    double snap_hi = static_cast<double>(b) / T;
    if (cur.lo[i] < snap_lo - 1e-15) {
      RealBox piece = cur;
      piece.hi[i] = snap_lo;
      out.stripes.push_back(piece);
      cur.lo[i] = snap_lo;
    }
    if (cur.hi[i] > snap_hi + 1e-15) {
      RealBox piece = cur;
      piece.lo[i] = snap_hi;
      out.stripes.push_back(piece);
      cur.hi[i] = snap_hi;
    }
  }
  if (!out.core_empty) {
    GridBox core;
    core.d = d;
    for (int i = 0; i < d; ++i) {
      core.lo[i] = static_cast<int>(std::llround(cur.lo[i] * T));
      core.hi[i] = static_cast<int>(std::llround(cur.hi[i] * T));
      if (core.lo[i] >= core.hi[i]) out.core_empty = true;
    }
    out.core = core;
  }
  return out;
}

std::vector<long> box_discrepancy(const std::vector<int>& signs,
                                  const std::vector<Point>& points,
                                  const GridBox& box, int T) {
  if (signs.size() != points.size()) throw InvalidInput("box_discrepancy: length mismatch");
  std::vector<long> out(signs.size());
  long acc = 0;
  for (size_t t = 0; t < signs.size(); ++t) {
    if (box.contains(points[t], T)) acc += signs[t];
    out[t] = std::labs(acc);
  }
  return out;
}

std::vector<long> stripe_counts(const std::vector<Point>& points,
                                const std::vector<RealBox>& boxes, int T) {
  std::vector<long> out;
  out.reserve(boxes.size());
  for (const RealBox& box : boxes) {
    BoxDecomposition dec = box_decompose(box, T, box.d);
    // Count points in the full enclosing width-1/T stripes, deduplicated.
    std::set<std::pair<int, long>> stripes;
    for (const RealBox& piece : dec.stripes)
      for (int i = 0; i < piece.d; ++i) {
        double w = piece.hi[i] - piece.lo[i];
        if (w <= 1.0 / T + 1e-12 && w > 0.0)
          stripes.insert({i, static_cast<long>(std::floor(piece.lo[i] * T + 1e-9))});
      }
    long count = 0;
    for (const auto& [dim, idx] : stripes) {
      double a = static_cast<double>(idx) / T, b = static_cast<double>(idx + 1) / T;
      for (const Point& p : points)
        if (p[dim] >= a && p[dim] < b) ++count;
    }
    out.push_back(count);
  }
  return out;
}

namespace {

struct SparseAtom {
  std::vector<uint64_t> keys;
  double weight = 0.0;
  double coeff = 0.0;  // shared coefficient of every nonzero entry
};

Point draw_point(std::mt19937_64& rng, int d, TusnadyDist dist) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Point x(d);
  x[0] = uni(rng);
  for (int i = 1; i < d; ++i) {
    if (dist == TusnadyDist::Uniform) {
      x[i] = uni(rng);
    } else {
      // Non-product blend: uniform marginals, strong dependence on x[0].
      double u = uni(rng);
      x[i] = std::fmod(x[0] + 0.1 * u, 1.0);
    }
  }
  return x;
}

}  // namespace

TusnadyResult run_tusnady(const TusnadyConfig& config) {
  check_dim(config.d);
  const int T = config.T, d = config.d;
  const int L = checked_log2(T);
  SeedTree seeds{config.seed};
  auto input_rng = make_rng(seeds.child(1));
  auto pool_rng = make_rng(seeds.child(2));
  auto algo_rng = make_rng(seeds.child(4));

  // Marginal CDFs: identity for uniform streams, empirical from a warm-up
  // sample otherwise.
  std::vector<Cdf> marginals(d);
  if (config.dist == TusnadyDist::Uniform) {
    for (int i = 0; i < d; ++i) marginals[i].fn = [](double x) { return x; };
  } else {
    auto warm_rng = make_rng(seeds.child(5));
    std::vector<std::vector<double>> cols(d);
    for (int i = 0; i < 1024; ++i) {
      Point p = draw_point(warm_rng, d, config.dist);
      for (int j = 0; j < d; ++j) cols[j].push_back(p[j]);
    }
    for (int j = 0; j < d; ++j) marginals[j] = empirical_cdf(std::move(cols[j]));
  }

  std::vector<TestBox> tests = dyadic_generated_testset(T, d, config.budget, seeds.child(3));
  const int n_tests = static_cast<int>(tests.size());

  const double vscale = std::pow(static_cast<double>(L + 1), -0.5 * d);
  const double zscale = std::pow(2.0 * L, -0.5 * d);
  double ambient = std::pow(2.0 * T - 1.0, d);  // |D|
  double lambda = config.lambda_override > 0.0
                      ? config.lambda_override
                      : 1.0 / (100.0 * std::log(ambient * T));

  // Atoms: half mass on a frozen pool of input chains, half on test boxes.
  std::vector<SparseAtom> atoms;
  for (int i = 0; i < config.pool_size; ++i) {
    Point p = cdf_transform(draw_point(pool_rng, d, config.dist), marginals);
    SparseAtom a;
    for (const DyadicBox& b : dyadic_boxes_for_point(p, T, d)) a.keys.push_back(b.key());
    a.weight = 0.5 / config.pool_size;
    a.coeff = vscale;
    atoms.push_back(std::move(a));
  }
  for (const TestBox& tb : tests) {
    SparseAtom a;
    for (const DyadicBox& b : tb.cover) a.keys.push_back(b.key());
    a.weight = 0.5 / n_tests;
    a.coeff = zscale;
    atoms.push_back(std::move(a));
  }

  std::unordered_map<uint64_t, std::vector<int>> index;  // box key -> atom ids
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i)
    for (uint64_t k : atoms[i].keys) index[k].push_back(i);

  std::vector<double> exps(atoms.size(), 0.0);
  double phi = 1.0;  // single scale, weights sum to 1, cosh(0) = 1
  double phi_max = phi;

  std::unordered_map<uint64_t, long> d_int;  // integer signed box counts
  std::vector<long> test_counts(n_tests, 0);

  TusnadyResult res;
  res.lambda = lambda;
  res.tracked_boxes = n_tests;
  std::vector<long> schedule = checkpoint_schedule(T);
  size_t next_cp = 0;

  std::vector<double> g(atoms.size(), 0.0);
  std::vector<int> touched;
  std::uniform_int_distribution<int> coin(0, 1);

  for (long t = 1; t <= T; ++t) {
    Point p = cdf_transform(draw_point(input_rng, d, config.dist), marginals);
    SparsePointVector chain = dyadic_boxes_for_point(p, T, d);

    int chi;
    if (config.signs == TusnadyConfig::Signs::Random) {
      chi = coin(algo_rng) ? 1 : -1;
    } else {
      touched.clear();
      for (const DyadicBox& b : chain) {
        auto it = index.find(b.key());
        if (it == index.end()) continue;
        for (int a : it->second) {
          if (g[a] == 0.0) touched.push_back(a);
          g[a] += lambda * vscale * atoms[a].coeff;
        }
      }
      double dp = 0.0, dm = 0.0;
      for (int a : touched) {
        double c0 = std::cosh(exps[a]);
        dp += atoms[a].weight * (std::cosh(exps[a] + g[a]) - c0);
        dm += atoms[a].weight * (std::cosh(exps[a] - g[a]) - c0);
      }
      // Deltas here scale like lambda^2 * vscale^2 and sit far below 1, so the
      // tie test must be relative; an absolute cutoff would drown the signal.
      double tie = 1e-9 * (std::abs(dp) + std::abs(dm));
      chi = (std::abs(dp - dm) <= tie) ? 1 : (dp < dm ? 1 : -1);
      for (int a : touched) {
        double old = std::cosh(exps[a]);
        exps[a] += chi * g[a];
        if (std::abs(exps[a]) > 700.0)
          throw OverflowError("tusnady: exponent beyond guard");
        phi += atoms[a].weight * (std::cosh(exps[a]) - old);
        g[a] = 0.0;
      }
      phi_max = std::max(phi_max, phi);
    }

    res.signs.push_back(chi);
    res.points.push_back(p);
    for (const DyadicBox& b : chain) d_int[b.key()] += chi;
    for (int i = 0; i < n_tests; ++i)
      if (tests[i].box.contains(p, T)) test_counts[i] += chi;

    if (next_cp < schedule.size() && t == schedule[next_cp]) {
      long max_count = 0, max_trace = 0;
      for (int i = 0; i < n_tests; ++i) {
        max_count = std::max(max_count, std::labs(test_counts[i]));
        long tr = 0;
        for (const DyadicBox& b : tests[i].cover) {
          auto it = d_int.find(b.key());
          if (it != d_int.end()) tr += it->second;
        }
        max_trace = std::max(max_trace, std::labs(tr));
      }
      res.checkpoint_ts.push_back(t);
      res.checkpoint_max_disc.push_back(max_count);
      res.checkpoint_max_trace.push_back(max_trace);
      res.phis.push_back(phi);
      ++next_cp;
    }
  }
  res.phi_max = phi_max;
  return res;
}

}  // namespace balance
