#ifndef USTAT_RNG_HPP_
#define USTAT_RNG_HPP_

#include <cstdint>
#include <limits>
#include <string_view>

namespace ustat {

/// xoshiro256++ seeded through SplitMix64.
///
/// Satisfies UniformRandomBitGenerator, but the samplers in this library only
/// use the member draws below so that streams are identical across standard
/// library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal draw (Marsaglia polar method, spare value cached).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Advances the state by 2^128 draws.
  void jump();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stable seed for replication `index` of the experiment phase `phase`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view phase, std::uint64_t index);

}  // namespace ustat

#endif  // USTAT_RNG_HPP_
