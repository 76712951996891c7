#pragma once

namespace horizon {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace horizon
