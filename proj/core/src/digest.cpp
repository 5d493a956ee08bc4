#include "raterfuse/digest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "raterfuse/errors.hpp"

namespace raterfuse {

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
}

std::string directory_digest(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    std::sort(files.begin(), files.end());
    std::string buf;
    for (const auto& rel : files) {
        std::ifstream in(fs::path(dir) / rel, std::ios::binary);
        if (!in) throw IoError("cannot read " + (fs::path(dir) / rel).string());
        std::ostringstream ss;
        ss << in.rdbuf();
        buf += rel.generic_string();
        buf.push_back('\0');
        buf += sha256_hex(ss.str());
        buf.push_back('\n');
    }
    return sha256_hex(buf);
}

}  // namespace raterfuse
