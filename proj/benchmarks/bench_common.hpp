#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "retroclass/embank.hpp"
#include "retroclass/vindex.hpp"

namespace bench {

inline std::vector<float> gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> n;
  std::vector<float> v(dim);
  for (auto& x : v) x = n(rng);
  return v;
}

// Rows clustered around `centers` random directions.
inline retroclass::EmbeddingBank clustered_bank(std::size_t rows, std::size_t dim,
                                                std::size_t centers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<float>> c;
  for (std::size_t i = 0; i < centers; ++i) c.push_back(gaussian(dim, rng));
  std::normal_distribution<float> n;
  retroclass::BankBuilder b(dim, "bench-text");
  b.reserve(rows);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& center = c[rng() % centers];
    for (std::size_t j = 0; j < dim; ++j) v[j] = center[j] + 0.8f * n(rng);
    b.append(v, "r");
  }
  return std::move(b).finalize();
}

inline retroclass::QueryEmbedding query(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return retroclass::QueryEmbedding::normalized(gaussian(dim, rng), "bench-text");
}

}  // namespace bench
