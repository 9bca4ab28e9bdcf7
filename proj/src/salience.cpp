#include "gem/salience.hpp"

#include <cmath>
#include <stdexcept>

namespace gem {

void validate(const SalienceParams& p) {
  if (!(p.decay_factor > 0.0 && p.decay_factor < 1.0)) {
    throw std::invalid_argument("salience: decay factor must lie in (0, 1)");
  }
  if (!(p.theta_summary > p.theta_remove && p.theta_remove > p.theta_archive && p.theta_archive > 0.0)) {
    throw std::invalid_argument("salience: thresholds must satisfy summary > remove > archive > 0");
  }
  if (!(p.initial > p.theta_summary)) {
    throw std::invalid_argument("salience: initial salience must exceed the summary threshold");
  }
  if (!(p.access_delta >= 0.0)) {
    throw std::invalid_argument("salience: access delta must be non-negative");
  }
}

const char* to_string(Eligibility e) {
  switch (e) {
    case Eligibility::Current: return "Current";
    case Eligibility::CompressEligible: return "CompressEligible";
    case Eligibility::HideEligible: return "HideEligible";
    case Eligibility::ArchiveEligible: return "ArchiveEligible";
  }
  return "?";
}

double decay(double s, std::uint64_t ticks, double lambda) {
  return s * std::pow(lambda, static_cast<double>(ticks));
}

double bump(double s, double access_delta) { return s + access_delta; }

Eligibility tier_of(double s, const SalienceParams& p) {
  if (s < p.theta_archive) return Eligibility::ArchiveEligible;
  if (s < p.theta_remove) return Eligibility::HideEligible;
  if (s < p.theta_summary) return Eligibility::CompressEligible;
  return Eligibility::Current;
}

}  // namespace gem
