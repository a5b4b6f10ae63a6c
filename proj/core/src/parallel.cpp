#include "meanfield/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace meanfield {

int thread_budget() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("MEANFIELD_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    } catch (...) {
      // unparsable value: ignore and keep the hardware count
    }
  }
  return hw;
}

void parallel_for(int begin, int end, const std::function<void(int, int)>& chunk_fn) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(thread_budget(), n);
  if (workers == 1) {
    chunk_fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int base = n / workers, extra = n % workers;
  int lo = begin;
  for (int t = 0; t < workers; ++t) {
    const int hi = lo + base + (t < extra ? 1 : 0);
    pool.emplace_back(chunk_fn, lo, hi);
    lo = hi;
  }
  for (auto& th : pool) th.join();
}

}  // namespace meanfield
