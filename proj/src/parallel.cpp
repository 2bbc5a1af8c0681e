#include "pgnaa/parallel.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

#include "pgnaa/log.hpp"

namespace pgnaa {

namespace {
std::atomic<unsigned> g_threads{0};
std::atomic<bool> g_quiet{false};
std::mutex g_log_mutex;
}  // namespace

void set_thread_count(unsigned n) { g_threads = n; }

unsigned thread_count() {
  const unsigned n = g_threads.load();
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void log_warning(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard lock(g_log_mutex);
  std::clog << "warning: " << message << '\n';
}

void set_quiet(bool q) { g_quiet = q; }
bool quiet() { return g_quiet; }

}  // namespace pgnaa
