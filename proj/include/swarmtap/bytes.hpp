#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace swarmtap {

// Raw octet buffer. std::string keeps the codecs allocation-friendly and
// interoperates with nlohmann::json and std::string_view.
using Bytes = std::string;

std::string to_hex(std::string_view raw);
Bytes from_hex(std::string_view hex);  // throws MalformedInput

// True if every octet is printable ASCII (0x20..0x7e).
bool is_printable(std::string_view s);

}  // namespace swarmtap
