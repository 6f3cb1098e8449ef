#include "ssfr/memtrack.hpp"

#include <malloc.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>

extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void __libc_free(void*);
}

namespace {

// Signed: blocks allocated inside libc but released through free() are
// subtracted without having been added.
std::atomic<long long> g_current{0};
std::atomic<long long> g_peak{0};
std::atomic<bool> g_active{false};

void on_alloc(void* p) {
  if (!p) return;
  const auto size = static_cast<long long>(malloc_usable_size(p));
  const long long now = g_current.fetch_add(size, std::memory_order_relaxed) + size;
  long long peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
  g_active.store(true, std::memory_order_relaxed);
}

void on_free(void* p) {
  if (!p) return;
  g_current.fetch_sub(static_cast<long long>(malloc_usable_size(p)), std::memory_order_relaxed);
}

}  // namespace

extern "C" {

void* malloc(std::size_t size) {
  void* p = __libc_malloc(size);
  on_alloc(p);
  return p;
}

void free(void* p) {
  on_free(p);
  __libc_free(p);
}

void* calloc(std::size_t count, std::size_t size) {
  void* p = __libc_calloc(count, size);
  on_alloc(p);
  return p;
}

void* realloc(void* old, std::size_t size) {
  const auto old_size = old ? static_cast<long long>(malloc_usable_size(old)) : 0LL;
  void* p = __libc_realloc(old, size);
  if (p) {
    g_current.fetch_sub(old_size, std::memory_order_relaxed);
    on_alloc(p);
  } else if (size == 0 && old) {
    g_current.fetch_sub(old_size, std::memory_order_relaxed);
  }
  return p;
}

void* memalign(std::size_t alignment, std::size_t size) {
  void* p = __libc_memalign(alignment, size);
  on_alloc(p);
  return p;
}

void* aligned_alloc(std::size_t alignment, std::size_t size) { return memalign(alignment, size); }

int posix_memalign(void** out, std::size_t alignment, std::size_t size) {
  void* p = __libc_memalign(alignment, size);
  if (!p) return ENOMEM;
  on_alloc(p);
  *out = p;
  return 0;
}

}  // extern "C"

namespace ssfr::memtrack {

std::size_t current_bytes() { return static_cast<std::size_t>(std::max(0LL, g_current.load(std::memory_order_relaxed))); }
std::size_t peak_bytes() { return static_cast<std::size_t>(std::max(0LL, g_peak.load(std::memory_order_relaxed))); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed); }
bool active() { return g_active.load(std::memory_order_relaxed); }

}  // namespace ssfr::memtrack
