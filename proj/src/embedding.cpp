#include "gem/embedding.hpp"

#include <cctype>
#include <cmath>

namespace gem {

EmbeddingVector::EmbeddingVector(const std::array<double, kEmbeddingDim>& components)
    : components_(components) {
  double sum = 0.0;
  for (double c : components_) sum += c * c;
  norm_ = std::sqrt(sum);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector embed(std::string_view text) {
  std::array<double, kEmbeddingDim> acc{};
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = fnv1a64(token);
    const std::size_t bucket = h % kEmbeddingDim;
    acc[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  return EmbeddingVector(acc);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) dot += a[i] * b[i];
  double c = dot / (a.norm() * b.norm());
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

}  // namespace gem
