#pragma once

namespace ethladder {

inline constexpr const char* kVersion = "1.0.0";

// Bumped whenever the on-disk spectrum cache layout changes.
inline constexpr int kCacheFormatVersion = 1;

} // namespace ethladder
