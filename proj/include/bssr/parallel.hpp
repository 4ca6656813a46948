#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bssr::detail {

// Runs `body(worker, chunk)` for every chunk in [0, n_chunks) on up to
// `workers` threads. Each worker calls `make_state()` once and passes the
// state to every chunk it claims. The first exception is rethrown after all
// threads have joined.
template <typename MakeState, typename Body>
void for_each_chunk(long n_chunks, unsigned workers, MakeState make_state, Body body) {
  if (n_chunks <= 0) return;
  const unsigned threads_wanted =
      static_cast<unsigned>(std::clamp<long>(static_cast<long>(workers), 1L, n_chunks));
  std::atomic<long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      auto state = make_state();
      for (long chunk = next.fetch_add(1); chunk < n_chunks; chunk = next.fetch_add(1)) {
        body(state, chunk);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n_chunks);
    }
  };

  if (threads_wanted == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads_wanted);
    for (unsigned i = 0; i < threads_wanted; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bssr::detail
