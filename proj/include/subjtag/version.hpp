#pragma once

namespace subjtag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace subjtag
