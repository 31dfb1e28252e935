#pragma once

#include <cstddef>
#include <functional>

namespace lqrlab {

/// Worker cap: LQRLAB_THREADS if set, hardware concurrency otherwise.
int max_threads();

/// Runs fn(i) for i in [0, count). Work items must be independent;
/// callers that reduce should write into index-addressed slots and fold
/// in index order afterwards so results do not depend on the schedule.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace lqrlab
