#include "dei/common.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dei {

std::string to_hex(std::uint64_t value) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("DEI_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
#ifdef DEI_BUILD_DATA_DIR
    if (std::filesystem::exists(DEI_BUILD_DATA_DIR)) {
        return DEI_BUILD_DATA_DIR;
    }
#endif
#ifdef DEI_INSTALL_DATA_DIR
    return DEI_INSTALL_DATA_DIR;
#else
    return "data";
#endif
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace dei
