#pragma once

#include <cstddef>
#include <functional>

namespace noisesphere {

/// Process-wide worker count used by parallel_for. Defaults to 1.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; the
/// body must only write to slots owned by index i so that results do not
/// depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace noisesphere
