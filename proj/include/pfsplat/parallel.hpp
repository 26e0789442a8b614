#pragma once

#include <cstddef>
#include <functional>

namespace pfsplat::parallel {

/// Worker count for internal parallel loops: PFSPLAT_THREADS if set, else the
/// hardware concurrency. An active ScopedThreadCount takes precedence.
[[nodiscard]] int thread_count();

/// Overrides thread_count() for the current scope (process wide, not nested-safe across threads).
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(int n);
  ~ScopedThreadCount();
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  int previous_;
};

/// Runs body(i) for i in [0, n). Work items are independent; each item's result
/// must not depend on which worker runs it.
void for_each_index(size_t n, const std::function<void(size_t)>& body);

}  // namespace pfsplat::parallel
