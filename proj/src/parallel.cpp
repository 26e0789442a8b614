#include "pfsplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace pfsplat::parallel {

namespace {

std::atomic<int> g_override{0};

int env_thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("PFSPLAT_THREADS")) {
      try {
        const int v = std::stoi(env);
        if (v > 0) return v;
      } catch (const std::exception&) {
      }
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }();
  return n;
}

}  // namespace

int thread_count() {
  const int o = g_override.load();
  return o > 0 ? o : env_thread_count();
}

ScopedThreadCount::ScopedThreadCount(int n) : previous_(g_override.exchange(std::max(1, n))) {}

ScopedThreadCount::~ScopedThreadCount() { g_override.store(previous_); }

void for_each_index(size_t n, const std::function<void(size_t)>& body) {
  const size_t workers = std::min(n, static_cast<size_t>(thread_count()));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
}

}  // namespace pfsplat::parallel
