// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace cgsorec {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable seed for a named subsystem (FNV-1a over the name, mixed with root).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

/// Per-user stream: root xor user id, then separated by stage name.
inline std::uint64_t user_seed(std::uint64_t root, std::uint64_t user,
                               std::string_view stage) noexcept {
  return derive_seed(root ^ user, stage);
}

template <typename Derived>
void fill_normal(Eigen::DenseBase<Derived>& out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, j) = static_cast<typename Derived::Scalar>(normal(rng));
}

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
  fill_normal(v, rng);
  return v;
}

}  // namespace cgsorec
