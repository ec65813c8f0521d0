#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "balance/common.hpp"

namespace balance {

constexpr int kMaxTusnadyDim = 3;

using Point = std::vector<double>;  // in [0,1]^d, d <= 3

// Product of dyadic intervals I_{j,k} = [k*2^-j, (k+1)*2^-j), one per dim.
struct DyadicBox {
  int d = 0;
  std::array<int, kMaxTusnadyDim> level{};   // 0 <= level[i] <= log2(T)
  std::array<int, kMaxTusnadyDim> offset{};  // 0 <= offset[i] < 2^level[i]

  bool contains(const Point& x) const;
  double volume() const;
  uint64_t key() const;  // packed (level, offset) per dim; unique for T <= 2^16
  bool operator==(const DyadicBox& o) const { return key() == o.key(); }
};

// The point's chain of containing dyadic boxes, one per level vector;
// all coefficients are 1. Sparsity (log2(T)+1)^d for interior points.
using SparsePointVector = std::vector<DyadicBox>;

// Per-dimension CDF: analytic function or empirical step table.
struct Cdf {
  std::function<double(double)> fn;  // if set, used directly
  std::vector<double> sample;        // else empirical, sorted
  double operator()(double x) const;
};

Cdf empirical_cdf(std::vector<double> sample);
Point cdf_transform(const Point& x, const std::vector<Cdf>& marginals);

SparsePointVector dyadic_boxes_for_point(const Point& x, int T, int d);

// Axis box with endpoints as integer multiples of 1/T.
struct GridBox {
  int d = 0;
  std::array<int, kMaxTusnadyDim> lo{}, hi{};  // units of 1/T, half-open
  bool contains(const Point& x, int T) const;
  long cells(int) const;
};

// Minimal disjoint dyadic cover of [lo/T, hi/T); greedy largest-aligned.
std::vector<DyadicBox> minimal_dyadic_cover_1d(int lo, int hi, int T);

// Product of the per-dimension minimal covers.
std::vector<DyadicBox> minimal_dyadic_cover(const GridBox& box, int T);

struct TestBox {
  GridBox box;
  std::vector<DyadicBox> cover;
};

// All dyadic-endpoint boxes when the count fits the budget, else a seeded
// uniform sample of `budget` such boxes.
std::vector<TestBox> dyadic_generated_testset(int T, int d, int budget,
                                              uint64_t seed);

// Real-coordinate axis box, for decomposition of non-aligned ranges.
struct RealBox {
  int d = 0;
  std::array<double, kMaxTusnadyDim> lo{}, hi{};
  bool contains(const Point& x) const;
  double volume() const;
};

struct BoxDecomposition {
  GridBox core;            // grid-aligned; may be empty (lo == hi somewhere)
  bool core_empty = false;
  std::vector<RealBox> stripes;  // <= 2d pieces inside width-1/T stripes
};

BoxDecomposition box_decompose(const RealBox& box, int T, int d);

// |chi_1 1_B(x_1) + ... + chi_t 1_B(x_t)| for every prefix t.
std::vector<long> box_discrepancy(const std::vector<int>& signs,
                                  const std::vector<Point>& points,
                                  const GridBox& box, int T);

enum class TusnadyDist { Uniform, Mixture };  // Mixture: non-product blend

struct TusnadyConfig {
  int T = 4096;     // power of two
  int d = 2;
  int budget = 2048;
  int pool_size = 256;
  TusnadyDist dist = TusnadyDist::Uniform;
  uint64_t seed = 1;
  double lambda_override = -1.0;
  enum class Signs { Potential, Random } signs = Signs::Potential;
};

struct TusnadyResult {
  std::vector<int> signs;
  std::vector<Point> points;  // CDF-transformed
  std::vector<long> checkpoint_ts;
  std::vector<long> checkpoint_max_disc;   // integer recount over tracked boxes
  std::vector<long> checkpoint_max_trace;  // via sparse d' z_B, integer-exact
  std::vector<double> phis;  // per checkpoint
  double phi_max = 0.0;
  double lambda = 0.0;
  int tracked_boxes = 0;
};

TusnadyResult run_tusnady(const TusnadyConfig& config);

// Points falling in the width-1/T stripes produced by decomposing `boxes`.
std::vector<long> stripe_counts(const std::vector<Point>& points,
                                const std::vector<RealBox>& boxes, int T);

}  // namespace balance
