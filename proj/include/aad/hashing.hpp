#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace aad {

std::string sha256_hex(std::string_view data);
std::array<unsigned char, 20> sha1_digest(std::string_view data);
std::string base64_encode(std::string_view data);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace aad
