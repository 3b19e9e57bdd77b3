#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace xst::numcore {

// Named deterministic random stream. Streams with the same seed but different
// names are statistically independent; the same (seed, name) pair always
// replays the same sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal(double mean, double stddev);
  bool bernoulli(double p);
  std::size_t index(std::size_t n);  // uniform in [0, n)

  std::mt19937_64& engine() { return engine_; }
  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }

  // Derives an independent child stream, e.g. one per epoch.
  RngStream fork(std::string_view child) const;

 private:
  std::uint64_t seed_;
  std::string name_;
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view s);

}  // namespace xst::numcore
