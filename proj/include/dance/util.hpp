#ifndef DANCE_UTIL_HPP
#define DANCE_UTIL_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dance {

// Global worker cap for the embarrassingly-parallel phases (oracle sweeps,
// dataset generation). 1 disables threading entirely.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker, so every element is computed by exactly one thread and the result
// is independent of scheduling.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

// splitmix64; used to derive independent sub-seeds from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic draws on top of mt19937_64. std::*_distribution is
// implementation-defined, so file-format-visible randomness goes through
// these instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // uniform in [0, 1)
  double next_double() { return (engine_() >> 11) * 0x1.0p-53; }
  // uniform in [lo, hi]
  std::int64_t next_int(std::int64_t lo, std::int64_t hi);
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
  double next_gumbel();
  double next_normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Shortest-ish decimal form with 9 significant digits ("%.9g").
std::string format_g9(double v);

// FNV-1a 64-bit, hex string. Used for manifest input fingerprints.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace dance

#endif
