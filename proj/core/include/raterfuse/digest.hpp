#pragma once

#include <string>
#include <string_view>

namespace raterfuse {

std::string sha256_hex(std::string_view data);
// Hash over (relative path, content) of every regular file, in sorted order.
std::string directory_digest(const std::string& dir);

}  // namespace raterfuse
