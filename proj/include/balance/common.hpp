#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace balance {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Rejected or malformed input (bad norms, empty sets, non-finite entries).
struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Exponent blew past the double range; signals a misconfigured lambda.
struct OverflowError : std::runtime_error {
  explicit OverflowError(const std::string& msg) : std::runtime_error(msg) {}
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives independent child seeds so probes never perturb the main stream.
struct SeedTree {
  uint64_t root = 0;
  uint64_t child(uint64_t tag) const { return splitmix64(root ^ splitmix64(tag)); }
};

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

}  // namespace balance
