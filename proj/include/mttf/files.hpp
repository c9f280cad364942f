#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mttf {

std::vector<std::uint8_t> read_bytes(const std::string& path);

// Write to "<path>.tmp" and rename over path.
void write_bytes_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace mttf
