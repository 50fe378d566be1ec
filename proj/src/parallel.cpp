#include "kfgrad/parallel.hpp"

#include <mutex>

#include <omp.h>

namespace kfgrad {

void for_each_index(std::size_t n, ExecPolicy policy, const std::function<void(std::size_t)>& body) {
  if (policy == ExecPolicy::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  std::mutex guard;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

int max_threads() noexcept { return omp_get_max_threads(); }
void set_threads(int n) noexcept { omp_set_num_threads(n); }

}  // namespace kfgrad
