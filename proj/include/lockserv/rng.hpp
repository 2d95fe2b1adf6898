#pragma once

#include <cstdint>
#include <random>

namespace lockserv {

// std::uniform_int_distribution and std::normal_distribution are
// implementation-defined, so streams built on them differ between standard
// libraries. These helpers only rely on the raw mt19937_64 sequence, which
// the standard pins down exactly.
class PortableRng {
 public:
  static constexpr const char* kName = "mt19937_64/polar-normal";

  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via the Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lockserv
