#pragma once

#include <cstddef>
#include <functional>

namespace v2tex {

struct ExecPolicy {
  int threads = 1;
  // Reduce in a fixed order that does not depend on the thread count.
  bool deterministic = true;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace v2tex
