#pragma once

#include <cstddef>
#include <functional>

namespace semisamp {

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Work items must
/// write only to their own output slots. If any call throws, the exception
/// from the lowest failing index is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace semisamp
