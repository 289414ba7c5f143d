// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgsorec/error.hpp"

namespace cgsorec {
namespace {

using ItemFilter = std::vector<bool>;  // empty = every item counts

std::vector<int> test_items(const InteractionMatrix& test, int user, const ItemFilter& keep) {
  std::vector<int> items;
  for (SparseRows::InnerIterator it(test.sparse(), user); it; ++it)
    if (keep.empty() || keep[it.col()]) items.push_back(it.col());
  return items;
}

void check_list(const RankedList& list, const InteractionMatrix& test, int k) {
  require(list.user >= 0 && list.user < test.n_users(), ErrorKind::kShape,
          "ranked list for unknown user " + std::to_string(list.user));
  require(static_cast<int>(list.items.size()) >= k, ErrorKind::kConfig,
          "ranked list shorter than K = " + std::to_string(k));
}

struct RecallParts {
  double hits = 0.0;
  double relevant = 0.0;
  double ratio_sum = 0.0;
  int users = 0;
};

RecallParts recall_parts(std::span<const RankedList> lists, const InteractionMatrix& test, int k,
                         const ItemFilter& keep) {
  RecallParts parts;
  for (const auto& list : lists) {
    check_list(list, test, k);
    const auto truth = test_items(test, list.user, keep);
    if (truth.empty()) continue;
    int hits = 0;
    for (int r = 0; r < k; ++r)
      hits += std::binary_search(truth.begin(), truth.end(), list.items[r]) ? 1 : 0;
    parts.hits += hits;
    parts.relevant += static_cast<double>(truth.size());
    parts.ratio_sum += static_cast<double>(hits) / static_cast<double>(truth.size());
    ++parts.users;
  }
  return parts;
}

std::optional<double> recall_impl(std::span<const RankedList> lists, const InteractionMatrix& test,
                                  int k, RecallMode mode, const ItemFilter& keep) {
  const auto parts = recall_parts(lists, test, k, keep);
  if (parts.users == 0) return std::nullopt;
  return mode == RecallMode::kGlobalRatio ? parts.hits / parts.relevant
                                          : parts.ratio_sum / parts.users;
}

std::optional<double> ndcg_impl(std::span<const RankedList> lists, const InteractionMatrix& test,
                                int k, const ItemFilter& keep) {
  double total = 0.0;
  int users = 0;
  for (const auto& list : lists) {
    check_list(list, test, k);
    const auto truth = test_items(test, list.user, keep);
    if (truth.empty()) continue;
    double dcg = 0.0;
    for (int r = 0; r < k; ++r)
      if (std::binary_search(truth.begin(), truth.end(), list.items[r]))
        dcg += 1.0 / std::log2(r + 2.0);
    double idcg = 0.0;
    const int ideal = std::min<int>(k, static_cast<int>(truth.size()));
    for (int r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(r + 2.0);
    total += dcg / idcg;
    ++users;
  }
  if (users == 0) return std::nullopt;
  return total / users;
}

double defined(std::optional<double> v, const char* metric) {
  require(v.has_value(), ErrorKind::kData,
          std::string(metric) + " undefined: no user has test interactions");
  return *v;
}

FrequencyBucket bucket(std::string label, const std::vector<int>& items,
                       const std::vector<long>& counts) {
  FrequencyBucket b;
  b.label = std::move(label);
  b.n_items = static_cast<int>(items.size());
  for (int i : items) b.total += counts[i];
  b.mean_frequency = b.n_items > 0 ? static_cast<double>(b.total) / b.n_items : 0.0;
  return b;
}

}  // namespace

RankedList rank_items(const VectorXd& scores, std::span<const int> mask, int k, int user) {
  const auto n = static_cast<int>(scores.size());
  require(k >= 0 && k <= n - static_cast<int>(mask.size()), ErrorKind::kConfig,
          "K = " + std::to_string(k) + " exceeds the " +
              std::to_string(n - static_cast<int>(mask.size())) + " rankable items");
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (!std::binary_search(mask.begin(), mask.end(), i)) candidates.push_back(i);
  auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), better);
  RankedList list;
  list.user = user;
  list.items.assign(candidates.begin(), candidates.begin() + k);
  for (int i : list.items) list.scores.push_back(scores[i]);
  return list;
}

std::vector<RankedList> rank_all(const MatrixXd& scores, std::span<const int> users,
                                 const InteractionMatrix& train, int k) {
  require(scores.rows() == static_cast<Eigen::Index>(users.size()), ErrorKind::kShape,
          "score rows differ from the user list");
  std::vector<RankedList> lists;
  lists.reserve(users.size());
  for (std::size_t r = 0; r < users.size(); ++r)
    lists.push_back(rank_items(scores.row(static_cast<Eigen::Index>(r)).transpose(),
                               train.row_items(users[r]), k, users[r]));
  return lists;
}

double recall_at_k(std::span<const RankedList> lists, const InteractionMatrix& test, int k,
                   RecallMode mode) {
  return defined(recall_impl(lists, test, k, mode, {}), "Recall");
}

double ndcg_at_k(std::span<const RankedList> lists, const InteractionMatrix& test, int k) {
  return defined(ndcg_impl(lists, test, k, {}), "NDCG");
}

HotTailMetrics group_metrics(std::span<const RankedList> lists, const InteractionMatrix& test,
                             const ItemGroups& groups, std::span<const int> ks,
                             RecallMode mode) {
  require(groups.n_items() == test.n_items(), ErrorKind::kShape,
          "item groups do not match the test matrix");
  HotTailMetrics out;
  ItemFilter hot = groups.is_hot;
  ItemFilter tail(hot.size());
  for (std::size_t i = 0; i < hot.size(); ++i) tail[i] = !hot[i];

  auto compute = [&](const ItemFilter& keep, const char* name) -> std::optional<GroupMetrics> {
    GroupMetrics g;
    for (int k : ks) {
      auto r = recall_impl(lists, test, k, mode, keep);
      if (!r) {
        out.notices.push_back(std::string(name) + " group has no test interactions; omitted");
        return std::nullopt;
      }
      g.recall[k] = *r;
      g.ndcg[k] = *ndcg_impl(lists, test, k, keep);
    }
    return g;
  };
  out.hot = compute(hot, "hot");
  out.tail = compute(tail, "tail");
  return out;
}

FrequencyHistogram frequency_histogram(std::span<const RankedList> lists,
                                       const InteractionMatrix& train, const ItemGroups& groups,
                                       int k) {
  require(!lists.empty(), ErrorKind::kData, "no ranked lists to histogram");
  const int n = train.n_items();
  FrequencyHistogram h;
  h.item_counts.assign(static_cast<std::size_t>(n), 0);
  for (const auto& list : lists) {
    require(static_cast<int>(list.items.size()) >= k, ErrorKind::kConfig,
            "ranked list shorter than K");
    for (int r = 0; r < k; ++r) ++h.item_counts[list.items[r]];
  }
  h.total = std::accumulate(h.item_counts.begin(), h.item_counts.end(), 0L);

  const auto order = popularity_order(train);
  for (int d = 0; d < 10; ++d) {
    const auto begin = order.begin() + static_cast<std::ptrdiff_t>(static_cast<long>(n) * d / 10);
    const auto end =
        order.begin() + static_cast<std::ptrdiff_t>(static_cast<long>(n) * (d + 1) / 10);
    h.deciles.push_back(bucket("D" + std::to_string(d + 1), std::vector<int>(begin, end),
                               h.item_counts));
  }
  h.hot = bucket("hot", groups.hot, h.item_counts);
  h.tail = bucket("tail", groups.tail, h.item_counts);
  return h;
}

EvalReport evaluate(std::span<const RankedList> lists, const InteractionMatrix& train,
                    const InteractionMatrix& test, const ItemGroups& groups,
                    std::span<const int> ks, RecallMode mode) {
  require(!ks.empty(), ErrorKind::kConfig, "at least one K is required");
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  for (int k : ks) {
    report.recall[k] = recall_at_k(lists, test, k, mode);
    report.ndcg[k] = ndcg_at_k(lists, test, k);
  }
  report.groups = group_metrics(lists, test, groups, ks, mode);
  report.freq = frequency_histogram(lists, train, groups, *std::max_element(ks.begin(), ks.end()));
  return report;
}

}  // namespace cgsorec
