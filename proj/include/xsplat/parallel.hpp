#pragma once

#include <cstdint>
#include <functional>

namespace xsplat {

// Process-wide worker count used by parallel_for. 0 restores the default
// (hardware concurrency).
void set_num_threads(int n);
int num_threads();

// Splits [0, n) into contiguous chunks, one worker per chunk, and blocks
// until all are done. Callers must write to disjoint slots and keep a fixed
// per-index evaluation order so results do not depend on scheduling.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t begin, std::int64_t end)>& body);

}  // namespace xsplat
