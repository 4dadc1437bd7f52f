// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace lumos {

/// Caps worker parallelism process-wide; 0 restores the hardware default.
void set_thread_count(int n);
int thread_count();

/// Number of contiguous chunks parallel_for_chunks will split [0, n) into.
/// Depends only on n and the configured thread count, so callers can allocate
/// per-chunk partials and reduce them in chunk order for deterministic sums.
int plan_chunks(std::size_t n);

/// Runs fn(begin, end, chunk_index) over the planned chunks. Exceptions from
/// workers are rethrown on the calling thread (first one wins).
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t, int)>& fn);

} // namespace lumos
