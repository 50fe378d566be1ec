#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace kfgrad {

// Serial is the reference path and the one the benchmarks time by default.
enum class ExecPolicy { serial, parallel };

// Calls body(i) for i in [0, n). The parallel policy distributes indices over
// OpenMP threads; the first exception thrown by any index is rethrown after
// the loop.
void for_each_index(std::size_t n, ExecPolicy policy, const std::function<void(std::size_t)>& body);

int max_threads() noexcept;
void set_threads(int n) noexcept;

}  // namespace kfgrad
