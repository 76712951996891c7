#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace horizon {

// All stochastic output is produced by mt19937_64 plus the hand-written
// transforms below.  The standard distribution classes are implementation
// defined and would break cross-platform byte reproducibility, so they are
// deliberately not used anywhere.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for an independent stream identified by (master, subject, stream).
// Nested splitmix keeps distinct ids statistically uncorrelated.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t subject,
                                 std::uint64_t stream = 0) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ splitmix64(subject + 0x632be59bd9b4e019ULL));
  return splitmix64(s ^ splitmix64(stream + 0x9e6c63d0676a9a99ULL));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on (0,1); the +0.5 offset keeps 0 and 1 unreachable so that
  // log(u) and logistic quantiles stay finite.
  double uniform() {
    const std::uint64_t u = eng_() >> 11;  // top 53 bits
    return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Logistic(0, scale) via inverse CDF.
  double logistic(double scale) {
    const double u = uniform();
    return scale * std::log(u / (1.0 - u));
  }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids per subject.  Fixed, documented offsets so adding a process to a
// system never perturbs the draws of unrelated processes.
namespace stream {
constexpr std::uint64_t attributes = 1;
constexpr std::uint64_t factor_level = 2;
constexpr std::uint64_t diffusion_init = 3;
constexpr std::uint64_t brownian = 16;       // + diffusion index
constexpr std::uint64_t jumps = 64;          // + counting index
constexpr std::uint64_t sampled_term = 112;  // + registered term index
constexpr std::uint64_t channel_noise = 128;    // + channel index
constexpr std::uint64_t channel_visits = 160;   // + channel index
constexpr std::uint64_t channel_dropout = 192;  // + channel index
constexpr std::uint64_t channel_censor = 224;   // + channel index
}  // namespace stream

}  // namespace horizon
