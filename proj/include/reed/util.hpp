#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace reed {

// 64-bit FNV-1a. Used for feature hashing, record identity, and checksums;
// never std::hash (not stable across implementations).
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0);
uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0);

// splitmix64 finalizer; good for deriving sub-seeds.
uint64_t mix64(uint64_t x);

// Derive a child seed from a parent seed and a string tag (domain names,
// stage names, ...). Stable across runs and platforms.
uint64_t derive_seed(uint64_t seed, std::string_view tag);
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index);

// Deterministic RNG. mt19937_64's output sequence is pinned by the standard;
// the distributions are hand-rolled because std::uniform_* are not.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, bound) by rejection.
    uint64_t below(uint64_t bound);

    // Double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Inclusive range.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Uniform real in [lo, hi).
    double uniform_real(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 gen_;
};

// Fisher-Yates with our own bounded draw so shuffles are reproducible.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// Shortest decimal form that round-trips a double exactly ("%.17g" fallback).
std::string format_double(double x);
double parse_double(const std::string& s);

// Whole-file helpers; throw IoError.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

std::string to_lower(std::string_view s);

}  // namespace reed
