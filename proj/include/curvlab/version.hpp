#pragma once

namespace curvlab {

inline constexpr const char* version = "0.1.0";

}  // namespace curvlab
