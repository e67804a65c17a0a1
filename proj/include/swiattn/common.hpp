#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace swiattn {

// Error hierarchy. Everything thrown by this library derives from Error so
// callers (CLI, tests) can catch one type and still tell classes apart.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreements (matmul inner dims, elementwise mismatch, ...).
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad static configuration (odd head_dim, invalid window, ...).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// API misuse: calling an operation outside its stated precondition
// (non-scalar backward, decode before prefill, empty sequence, ...).
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf detected in an operation output. Never silent.
struct NumericsError : Error {
  explicit NumericsError(const std::string& msg) : Error(msg) {}
};

// Checkpoint / file format problems.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Deterministic 64-bit PRNG (xoshiro-style splitmix64 + mt19937_64 would both
// do; we keep a single mt19937_64 so one seed drives every random decision).
// Distribution helpers are hand-rolled so streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix(seed)) {}

  uint64_t next_u64() {
    // xorshift64*
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (fresh pair each call, second value dropped
  // to keep the stream position independent of call parity).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derive an independent stream (for parallel sweeps merged by index).
  Rng fork(uint64_t salt) { return Rng(next_u64() ^ splitmix(salt)); }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }
  uint64_t state_;
};

}  // namespace swiattn
