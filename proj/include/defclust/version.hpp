#pragma once

namespace defclust {

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace defclust
