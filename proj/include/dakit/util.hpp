#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dakit {

// Escapes a byte string for the line-oriented vocab/merges files: a byte is
// emitted literally iff it is printable ASCII other than backslash
// (0x21..0x7e, excluding '\\'); everything else becomes "\xNN" (lowercase).
// Space and tab are always escaped so escaped tokens never collide with the
// field separators of those files.
std::string escape_bytes(std::string_view raw);

// Inverse of escape_bytes. Throws Error("BadEscape") on malformed input.
std::string unescape_bytes(std::string_view escaped);

bool is_valid_utf8(std::string_view s);

uint64_t fnv1a64(std::string_view s, uint64_t seed = 14695981039346656037ULL);

// Uniform double in [0,1) from the top 53 bits of a mt19937_64 draw.
// mt19937_64 output is pinned by the standard, so this is reproducible
// across platforms (unlike std::uniform_real_distribution).
inline double next_unit(std::mt19937_64 & rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n) via fixed-point multiply of a raw draw.
inline size_t next_index(std::mt19937_64 & rng, size_t n) {
    return static_cast<size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Seeded Fisher-Yates: for i = n..2 swap v[i-1] with v[next_index(rng, i)].
template <typename T>
void shuffle_seeded(std::vector<T> & v, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = next_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

std::string read_file(const std::string & path);
void write_file(const std::string & path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

double parse_double(std::string_view s);

std::string lowercase(std::string_view s);

} // namespace dakit
