#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace dmlcbo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// All sampling goes through an explicitly passed engine; nothing in the
// library touches global random state.
using Rng = std::mt19937_64;

// Derives an independent 64-bit seed for a named substream (splitmix64 over
// the base seed mixed with an FNV-1a hash of the tag).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = base ^ (h + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t base, std::string_view tag) {
  return Rng(derive_seed(base, tag));
}

// Raised when an intermediate quantity becomes NaN or infinite; `stage` names
// the computation that produced it.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

inline void require_finite(const Vec& v, const std::string& stage) {
  if (!v.allFinite()) {
    throw NumericalError(stage, "non-finite value produced in " + stage);
  }
}

inline void require_dim(const Vec& v, Eigen::Index n, const std::string& what) {
  if (v.size() != n) {
    throw std::invalid_argument(what + ": expected dimension " + std::to_string(n) +
                                ", got " + std::to_string(v.size()));
  }
}

}  // namespace dmlcbo
