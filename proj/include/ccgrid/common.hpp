#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ccgrid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// SplitMix64-based generator. All sampling in the library goes through this
// so that results are reproducible across platforms and standard library
// versions (std::uniform_real_distribution is implementation-defined).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1) with 53 random bits
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // modulo bias is negligible for n << 2^64 and keeps the stream simple
    return next_u64() % n;
  }

private:
  std::uint64_t state_;
};

// Derive a child seed for a named stream (sample index, scenario index, ...).
// Used to make per-item generation independent of iteration order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
  return r.next_u64();
}

// Seed namespaces: keeps training data, selection pools and validation pools
// on disjoint streams even when the user passes the same base seed.
enum class SeedDomain : std::uint64_t {
  Training = 0x7261696eULL,
  ScenarioPool = 0x706f6f6cULL,
  Validation = 0x76616c69ULL,
  Sampling = 0x73616d70ULL,
};

inline std::uint64_t domain_seed(std::uint64_t seed, SeedDomain d) {
  return derive_seed(seed, static_cast<std::uint64_t>(d));
}

// Shortest decimal form that round-trips a double; used for all emitted
// CSV/JSON numbers so reports are byte-deterministic.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::strtod(buf, nullptr);
  for (int prec = 1; prec <= 16; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == back) return shorter;
  }
  return buf;
}

// FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ccgrid
