#include "reed/util.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reed/errors.hpp"

namespace reed {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull ^ mix64(seed);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
    return fnv1a64(bytes.data(), bytes.size(), seed);
}

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    return mix64(seed ^ fnv1a64(tag));
}

uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index) {
    return mix64(derive_seed(seed, tag) ^ mix64(index));
}

uint64_t Rng::below(uint64_t bound) {
    if (bound == 0) throw ParamError("Rng::below: bound must be positive");
    uint64_t threshold = -bound % bound;  // 2^64 mod bound
    for (;;) {
        uint64_t r = gen_();
        if (r >= threshold) return r % bound;
    }
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw ParamError("Rng::uniform_int: empty range");
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
}

std::string format_double(double x) {
    // Shortest representation that parses back to the same bits.
    for (int prec = 1; prec <= 17; ++prec) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (parse_double(buf) == x) return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParseError("not a number: '" + s + "'");
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure: " + path);
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failure: " + path);
}

bool file_exists(const std::string& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory: " + path + ": " + ec.message());
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

}  // namespace reed
