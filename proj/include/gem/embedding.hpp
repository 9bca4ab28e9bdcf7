#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gem {

inline constexpr std::size_t kEmbeddingDim = 256;

// Signed feature-hash vector with a cached Euclidean norm.
class EmbeddingVector {
 public:
  EmbeddingVector() { components_.fill(0.0); }
  explicit EmbeddingVector(const std::array<double, kEmbeddingDim>& components);

  const std::array<double, kEmbeddingDim>& components() const { return components_; }
  double norm() const { return norm_; }
  double operator[](std::size_t i) const { return components_[i]; }

  bool operator==(const EmbeddingVector& o) const { return components_ == o.components_; }

 private:
  std::array<double, kEmbeddingDim> components_;
  double norm_ = 0.0;
};

// 64-bit FNV-1a over the raw bytes. Byte-order independent.
std::uint64_t fnv1a64(std::string_view bytes);

// Lowercase ASCII, split on anything non-alphanumeric, drop empty tokens.
std::vector<std::string> tokenize(std::string_view text);

EmbeddingVector embed(std::string_view text);

// dot(a,b)/(|a||b|); 0 when either norm is 0.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace gem
