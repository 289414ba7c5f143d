// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace cgsorec {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

/// Sparse m x n user-item matrix. Holds raw binary R as well as real-valued
/// derived matrices (social preference, its inversion, the item condition).
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(int n_users, int n_items) : data_(n_users, n_items) {}
  explicit InteractionMatrix(SparseRows data) : data_(std::move(data)) {
    data_.makeCompressed();
  }

  /// Builds from (user, item) pairs; duplicates collapse to a single 1.
  static InteractionMatrix from_pairs(int n_users, int n_items,
                                      const std::vector<std::pair<int, int>>& pairs);

  int n_users() const { return static_cast<int>(data_.rows()); }
  int n_items() const { return static_cast<int>(data_.cols()); }
  Eigen::Index nnz() const { return data_.nonZeros(); }

  const SparseRows& sparse() const { return data_; }

  /// Dense copy of one user's row.
  VectorXd dense_row(int user) const;
  /// Item ids stored in a user's row, ascending.
  std::vector<int> row_items(int user) const;
  /// All stored (user, item) pairs in row-major order.
  std::vector<std::pair<int, int>> pairs() const;
  /// Number of stored entries per item.
  std::vector<int> item_counts() const;
  /// Number of stored entries per user.
  std::vector<int> user_counts() const;

 private:
  SparseRows data_;
};

/// Sparse m x m user-user matrix (raw S, co-purchase counts, the social
/// condition, or the binarized denoised network).
class SocialMatrix {
 public:
  SocialMatrix() = default;
  explicit SocialMatrix(int n_users) : data_(n_users, n_users) {}
  explicit SocialMatrix(SparseRows data) : data_(std::move(data)) {
    data_.makeCompressed();
  }

  /// Builds a binary matrix from edges, dropping self-loops and duplicates.
  static SocialMatrix from_edges(int n_users, const std::vector<std::pair<int, int>>& edges,
                                 bool symmetrize);

  int n_users() const { return static_cast<int>(data_.rows()); }
  Eigen::Index nnz() const { return data_.nonZeros(); }
  const SparseRows& sparse() const { return data_; }

  VectorXd dense_row(int user) const;
  std::vector<int> degrees() const;

 private:
  SparseRows data_;
};

struct LoadOptions {
  std::optional<int> n_users;
  std::optional<int> n_items;
  bool symmetrize = true;  // social only
};

InteractionMatrix load_interactions(const std::filesystem::path& path,
                                    const LoadOptions& opts = {});
SocialMatrix load_social(const std::filesystem::path& path, const LoadOptions& opts = {});

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct SplitBundle {
  InteractionMatrix train;
  InteractionMatrix valid;
  InteractionMatrix test;
  InteractionMatrix debiased_test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

/// Per-user seeded partition. Users with fewer than 3 interactions keep
/// everything in train. Otherwise valid/test sizes are round(k * ratio),
/// at least 1 when the ratio is positive.
SplitBundle split(const InteractionMatrix& r, const SplitRatios& ratios, std::uint64_t seed);

/// Number of (train, valid, test) interactions a user with k items receives.
std::array<int, 3> split_sizes(int k, const SplitRatios& ratios);

/// Resamples test so every retained item has exactly `cap` interactions.
/// cap = nullopt selects the largest cap keeping >= 30% of test items.
InteractionMatrix build_debiased_test(const InteractionMatrix& test, std::optional<int> cap,
                                      std::uint64_t seed);

/// Cap chosen by the auto rule.
int auto_debias_cap(const InteractionMatrix& test);

struct ItemGroups {
  std::vector<int> hot;   // ascending ids
  std::vector<int> tail;  // ascending ids
  std::vector<bool> is_hot;
  double hot_fraction = 0.05;

  int n_items() const { return static_cast<int>(is_hot.size()); }
};

/// Top ceil(fraction * n) items by train count (ties: lower id first) are hot.
ItemGroups partition_items(const InteractionMatrix& train, double hot_fraction);

/// Items ordered by descending train count, ascending id on ties.
std::vector<int> popularity_order(const InteractionMatrix& train);

/// R with hot-item columns removed.
InteractionMatrix longtail_submatrix(const InteractionMatrix& r, const ItemGroups& groups);

/// R_l R_l^T: shared long-tail item counts, diagonal kept.
SocialMatrix copurchase(const InteractionMatrix& r_longtail);

/// delta * S_cpl + S.
SocialMatrix social_condition(const SocialMatrix& s, const SocialMatrix& s_cpl, double delta);

/// S R: per item, how many of the user's neighbours interacted with it.
InteractionMatrix social_preference(const SocialMatrix& s, const InteractionMatrix& r);

/// Elementwise 1/x on stored nonzeros, zeros stay zero.
InteractionMatrix invert_preference(const InteractionMatrix& rs);
double invert_preference(double x);

/// lambda * f(R^s) + R.
InteractionMatrix item_condition(const InteractionMatrix& r, const InteractionMatrix& rs,
                                 double lambda);

}  // namespace cgsorec
