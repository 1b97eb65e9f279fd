#include "c2f/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace c2f {
namespace {

std::size_t from_environment() {
  std::size_t count = 0;
  if (const char* env = std::getenv("C2F_THREADS")) {
    try {
      count = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      count = 0;
    }
  }
  if (count == 0) count = std::max(1u, std::thread::hardware_concurrency());
  return count;
}

std::atomic<std::size_t>& cap() {
  static std::atomic<std::size_t> value{from_environment()};
  return value;
}

}  // namespace

std::size_t worker_threads() { return cap().load(); }

void set_worker_threads(std::size_t count) {
  cap().store(count == 0 ? std::max(1u, std::thread::hardware_concurrency())
                         : count);
}

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  // The failure with the lowest index is rethrown, independent of scheduling.
  std::mutex failure_mutex;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace c2f
