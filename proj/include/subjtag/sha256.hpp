#pragma once

#include <string>
#include <string_view>

namespace subjtag {

// Lowercase hex digest of the UTF-8 bytes.
std::string sha256_hex(std::string_view data);

}  // namespace subjtag
