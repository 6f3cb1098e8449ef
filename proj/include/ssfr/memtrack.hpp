#pragma once

#include <cstddef>

// Process-wide heap accounting. Linking the ssfr_memtrack library interposes
// malloc/free and friends; every live block is counted by its usable size.
namespace ssfr::memtrack {

std::size_t current_bytes();
std::size_t peak_bytes();
/// Restarts peak tracking from the current level.
void reset_peak();
/// True once the interposed allocator has served a request.
bool active();

}  // namespace ssfr::memtrack
