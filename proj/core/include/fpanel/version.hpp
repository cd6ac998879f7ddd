#pragma once

namespace fpanel {

inline constexpr const char* library_version = "0.1.0";

/// Major version of the on-disk JSON document layout. Loaders reject
/// documents whose major version differs.
inline constexpr const char* schema_version = "1.0";

}  // namespace fpanel
