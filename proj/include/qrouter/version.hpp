#pragma once

namespace qrouter {

inline constexpr const char* kVersion = "qrouter 0.1.0";

// Bump when a CSV/JSON column layout changes.
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kJsonSchemaVersion = 1;

} // namespace qrouter
