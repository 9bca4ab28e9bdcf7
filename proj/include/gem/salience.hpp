#pragma once

#include <cstdint>

namespace gem {

struct SalienceParams {
  double initial = 1.0;        // s0
  double access_delta = 1.0;   // added per access
  double decay_factor = 0.9;   // lambda, applied once per tick
  double theta_summary = 0.5;
  double theta_remove = 0.2;
  double theta_archive = 0.05;
  std::uint64_t k_recent = 3;
};

// Throws std::invalid_argument naming the violated constraint.
void validate(const SalienceParams& p);

enum class Eligibility { Current, CompressEligible, HideEligible, ArchiveEligible };

const char* to_string(Eligibility e);

// s * lambda^ticks
double decay(double s, std::uint64_t ticks, double lambda);

double bump(double s, double access_delta);

// Strict less-than against each threshold, most attenuated first.
Eligibility tier_of(double s, const SalienceParams& p);

// True when `a` is at least as attenuated as `b`.
inline bool at_least_as_attenuated(Eligibility a, Eligibility b) {
  return static_cast<int>(a) >= static_cast<int>(b);
}

}  // namespace gem
