// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace cgsorec {

/// Worker count: CGSOREC_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(task) for task in [0, n_tasks) across worker_count() threads.
/// Tasks must write to disjoint outputs; results are then independent of
/// scheduling order.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn);

}  // namespace cgsorec
