// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "cgsorec/error.hpp"
#include "cgsorec/random.hpp"

namespace cgsorec {
namespace {

using Triplet = Eigen::Triplet<double, int>;

SparseRows binary_from_pairs(int rows, int cols, std::vector<std::pair<int, int>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<Triplet> triplets;
  triplets.reserve(pairs.size());
  for (auto [r, c] : pairs) triplets.emplace_back(r, c, 1.0);
  SparseRows m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

SparseRows drop_zeros(SparseRows m) {
  m.prune([](int, int, double v) { return v != 0.0; });
  m.makeCompressed();
  return m;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ') ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct ParsedPairs {
  std::vector<std::pair<int, int>> pairs;
  int max_first = -1;
  int max_second = -1;
};

// Reads `a<TAB>b[<TAB>rating]` records. Records with rating <= 0 are skipped.
ParsedPairs read_pairs(const std::filesystem::path& path, bool allow_rating) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path.string());
  ParsedPairs out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > (allow_rating ? 3u : 2u))
      fail(ErrorKind::kParse, where + ": expected " +
                                  (allow_rating ? "2 or 3" : "2") + " fields, got " +
                                  std::to_string(fields.size()));
    int a = 0, b = 0;
    if (!parse_number(fields[0], a) || !parse_number(fields[1], b) || a < 0 || b < 0)
      fail(ErrorKind::kParse, where + ": ids must be non-negative integers");
    if (fields.size() == 3) {
      double rating = 0.0;
      if (!parse_number(fields[2], rating) || !std::isfinite(rating))
        fail(ErrorKind::kParse, where + ": rating is not a number");
      if (rating <= 0.0) continue;
    }
    out.max_first = std::max(out.max_first, a);
    out.max_second = std::max(out.max_second, b);
    out.pairs.emplace_back(a, b);
  }
  return out;
}

int resolve_dim(std::optional<int> declared, int max_id, const char* what) {
  if (!declared) return max_id + 1;
  require(*declared >= 0, ErrorKind::kConfig, std::string(what) + " must be >= 0");
  require(max_id < *declared, ErrorKind::kDimension,
          std::string(what) + " declared as " + std::to_string(*declared) +
              " but data contains id " + std::to_string(max_id));
  return *declared;
}

}  // namespace

InteractionMatrix InteractionMatrix::from_pairs(int n_users, int n_items,
                                                const std::vector<std::pair<int, int>>& pairs) {
  for (auto [u, i] : pairs)
    require(u >= 0 && u < n_users && i >= 0 && i < n_items, ErrorKind::kDimension,
            "pair (" + std::to_string(u) + "," + std::to_string(i) + ") outside " +
                std::to_string(n_users) + "x" + std::to_string(n_items));
  return InteractionMatrix(binary_from_pairs(n_users, n_items, pairs));
}

VectorXd InteractionMatrix::dense_row(int user) const {
  VectorXd row = VectorXd::Zero(n_items());
  for (SparseRows::InnerIterator it(data_, user); it; ++it) row[it.col()] = it.value();
  return row;
}

std::vector<int> InteractionMatrix::row_items(int user) const {
  std::vector<int> items;
  for (SparseRows::InnerIterator it(data_, user); it; ++it) items.push_back(it.col());
  return items;
}

std::vector<std::pair<int, int>> InteractionMatrix::pairs() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(nnz()));
  for (int u = 0; u < n_users(); ++u)
    for (SparseRows::InnerIterator it(data_, u); it; ++it) out.emplace_back(u, it.col());
  return out;
}

std::vector<int> InteractionMatrix::item_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(n_items()), 0);
  for (int u = 0; u < n_users(); ++u)
    for (SparseRows::InnerIterator it(data_, u); it; ++it) ++counts[it.col()];
  return counts;
}

std::vector<int> InteractionMatrix::user_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(n_users()), 0);
  for (int u = 0; u < n_users(); ++u)
    counts[u] = static_cast<int>(data_.outerIndexPtr()[u + 1] - data_.outerIndexPtr()[u]);
  return counts;
}

SocialMatrix SocialMatrix::from_edges(int n_users, const std::vector<std::pair<int, int>>& edges,
                                      bool symmetrize) {
  std::vector<std::pair<int, int>> kept;
  kept.reserve(edges.size() * (symmetrize ? 2 : 1));
  for (auto [a, b] : edges) {
    require(a >= 0 && a < n_users && b >= 0 && b < n_users, ErrorKind::kDimension,
            "edge (" + std::to_string(a) + "," + std::to_string(b) + ") outside " +
                std::to_string(n_users) + " users");
    if (a == b) continue;
    kept.emplace_back(a, b);
    if (symmetrize) kept.emplace_back(b, a);
  }
  return SocialMatrix(binary_from_pairs(n_users, n_users, std::move(kept)));
}

VectorXd SocialMatrix::dense_row(int user) const {
  VectorXd row = VectorXd::Zero(n_users());
  for (SparseRows::InnerIterator it(data_, user); it; ++it) row[it.col()] = it.value();
  return row;
}

std::vector<int> SocialMatrix::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(n_users()), 0);
  for (int u = 0; u < n_users(); ++u)
    for (SparseRows::InnerIterator it(data_, u); it; ++it)
      if (it.value() != 0.0) ++deg[u];
  return deg;
}

InteractionMatrix load_interactions(const std::filesystem::path& path, const LoadOptions& opts) {
  auto parsed = read_pairs(path, /*allow_rating=*/true);
  const int users = resolve_dim(opts.n_users, parsed.max_first, "n_users");
  const int items = resolve_dim(opts.n_items, parsed.max_second, "n_items");
  return InteractionMatrix(binary_from_pairs(users, items, std::move(parsed.pairs)));
}

SocialMatrix load_social(const std::filesystem::path& path, const LoadOptions& opts) {
  auto parsed = read_pairs(path, /*allow_rating=*/false);
  const int users =
      resolve_dim(opts.n_users, std::max(parsed.max_first, parsed.max_second), "n_users");
  return SocialMatrix::from_edges(users, parsed.pairs, opts.symmetrize);
}

std::array<int, 3> split_sizes(int k, const SplitRatios& ratios) {
  if (k < 3) return {k, 0, 0};
  auto portion = [k](double ratio) {
    if (ratio <= 0.0) return 0;
    return std::max(1, static_cast<int>(std::floor(k * ratio + 0.5)));
  };
  const int valid = portion(ratios.valid);
  const int test = portion(ratios.test);
  return {k - valid - test, valid, test};
}

SplitBundle split(const InteractionMatrix& r, const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  require(std::abs(sum - 1.0) < 1e-9, ErrorKind::kConfig, "split ratios must sum to 1");
  require(ratios.train > 0 && ratios.valid >= 0 && ratios.test >= 0, ErrorKind::kConfig,
          "split ratios must be non-negative with a positive train share");
  std::vector<std::pair<int, int>> train, valid, test;
  for (int u = 0; u < r.n_users(); ++u) {
    auto items = r.row_items(u);
    const auto [n_train, n_valid, n_test] = split_sizes(static_cast<int>(items.size()), ratios);
    Rng rng(user_seed(seed, static_cast<std::uint64_t>(u), "split"));
    for (std::size_t i = items.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(items[i - 1], items[pick(rng)]);
    }
    std::size_t pos = 0;
    for (int k = 0; k < n_train; ++k) train.emplace_back(u, items[pos++]);
    for (int k = 0; k < n_valid; ++k) valid.emplace_back(u, items[pos++]);
    for (int k = 0; k < n_test; ++k) test.emplace_back(u, items[pos++]);
  }
  SplitBundle out;
  out.train = InteractionMatrix::from_pairs(r.n_users(), r.n_items(), train);
  out.valid = InteractionMatrix::from_pairs(r.n_users(), r.n_items(), valid);
  out.test = InteractionMatrix::from_pairs(r.n_users(), r.n_items(), test);
  out.debiased_test = InteractionMatrix(r.n_users(), r.n_items());
  out.ratios = ratios;
  out.seed = seed;
  return out;
}

int auto_debias_cap(const InteractionMatrix& test) {
  const auto counts = test.item_counts();
  const long present = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; });
  require(present > 0, ErrorKind::kData, "test split has no interactions");
  int best = 1;
  const int max_count = *std::max_element(counts.begin(), counts.end());
  for (int c = 1; c <= max_count; ++c) {
    const long survivors =
        std::count_if(counts.begin(), counts.end(), [c](int n) { return n >= c; });
    if (10 * survivors >= 3 * present) best = c;
  }
  return best;
}

InteractionMatrix build_debiased_test(const InteractionMatrix& test, std::optional<int> cap,
                                      std::uint64_t seed) {
  require(test.nnz() > 0, ErrorKind::kData, "test split is empty");
  const int c = cap ? *cap : auto_debias_cap(test);
  require(c >= 1, ErrorKind::kConfig, "debias cap must be >= 1");

  std::vector<std::vector<int>> users_of(static_cast<std::size_t>(test.n_items()));
  for (auto [u, i] : test.pairs()) users_of[i].push_back(u);

  std::vector<std::pair<int, int>> kept;
  for (int item = 0; item < test.n_items(); ++item) {
    auto& users = users_of[item];
    if (static_cast<int>(users.size()) < c) continue;
    Rng rng(user_seed(seed, static_cast<std::uint64_t>(item), "debias"));
    for (int k = 0; k < c; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k),
                                                      users.size() - 1);
      std::swap(users[k], users[pick(rng)]);
      kept.emplace_back(users[k], item);
    }
  }
  require(!kept.empty(), ErrorKind::kData,
          "no item reaches the debias cap of " + std::to_string(c));
  return InteractionMatrix::from_pairs(test.n_users(), test.n_items(), kept);
}

std::vector<int> popularity_order(const InteractionMatrix& train) {
  const auto counts = train.item_counts();
  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  return order;
}

ItemGroups partition_items(const InteractionMatrix& train, double hot_fraction) {
  require(hot_fraction > 0.0 && hot_fraction < 1.0, ErrorKind::kConfig,
          "hot_fraction must be in (0, 1)");
  const int n = train.n_items();
  // The small slack keeps products like 0.05 * 100 from rounding up.
  const int n_hot = std::min(n, static_cast<int>(std::ceil(hot_fraction * n - 1e-9)));
  const auto order = popularity_order(train);

  ItemGroups groups;
  groups.hot_fraction = hot_fraction;
  groups.is_hot.assign(static_cast<std::size_t>(n), false);
  for (int k = 0; k < n_hot; ++k) groups.is_hot[order[k]] = true;
  for (int i = 0; i < n; ++i) (groups.is_hot[i] ? groups.hot : groups.tail).push_back(i);
  return groups;
}

InteractionMatrix longtail_submatrix(const InteractionMatrix& r, const ItemGroups& groups) {
  require(groups.n_items() == r.n_items(), ErrorKind::kShape,
          "item groups do not match the interaction matrix");
  SparseRows out = r.sparse();
  out.prune([&](int, int col, double) { return !groups.is_hot[col]; });
  return InteractionMatrix(std::move(out));
}

SocialMatrix copurchase(const InteractionMatrix& r_longtail) {
  const SparseRows& rl = r_longtail.sparse();
  SparseRows product = rl * SparseRows(rl.transpose());
  return SocialMatrix(drop_zeros(std::move(product)));
}

SocialMatrix social_condition(const SocialMatrix& s, const SocialMatrix& s_cpl, double delta) {
  require(delta >= 0.0, ErrorKind::kConfig, "delta must be >= 0");
  require(s.n_users() == s_cpl.n_users(), ErrorKind::kShape,
          "social and co-purchase matrices differ in size");
  if (delta == 0.0) return s;
  SparseRows out = delta * s_cpl.sparse() + s.sparse();
  return SocialMatrix(drop_zeros(std::move(out)));
}

InteractionMatrix social_preference(const SocialMatrix& s, const InteractionMatrix& r) {
  require(s.n_users() == r.n_users(), ErrorKind::kShape,
          "social matrix and interaction matrix disagree on user count");
  SparseRows out = s.sparse() * r.sparse();
  return InteractionMatrix(drop_zeros(std::move(out)));
}

double invert_preference(double x) { return x != 0.0 ? 1.0 / x : 0.0; }

InteractionMatrix invert_preference(const InteractionMatrix& rs) {
  SparseRows out = rs.sparse();
  for (int u = 0; u < out.outerSize(); ++u)
    for (SparseRows::InnerIterator it(out, u); it; ++it)
      it.valueRef() = invert_preference(it.value());
  return InteractionMatrix(std::move(out));
}

InteractionMatrix item_condition(const InteractionMatrix& r, const InteractionMatrix& rs,
                                 double lambda) {
  require(lambda >= 0.0, ErrorKind::kConfig, "lambda must be >= 0");
  require(r.n_users() == rs.n_users() && r.n_items() == rs.n_items(), ErrorKind::kShape,
          "item condition operands differ in shape");
  if (lambda == 0.0) return r;
  SparseRows out = lambda * invert_preference(rs).sparse() + r.sparse();
  return InteractionMatrix(drop_zeros(std::move(out)));
}

}  // namespace cgsorec
