#include <doctest.h>

#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace dakit;

TEST_CASE("escape_bytes leaves plain printable bytes alone") {
    CHECK(escape_bytes("abcXYZ09!~") == "abcXYZ09!~");
    CHECK(escape_bytes("") == "");
}

TEST_CASE("escape_bytes escapes space, tab, backslash, and control bytes") {
    CHECK(escape_bytes(" ") == "\\x20");
    CHECK(escape_bytes("\t") == "\\x09");
    CHECK(escape_bytes("\\") == "\\x5c");
    CHECK(escape_bytes("\n") == "\\x0a");
    CHECK(escape_bytes(std::string(1, '\0')) == "\\x00");
    CHECK(escape_bytes("\xff") == "\\xff");
    CHECK(escape_bytes("a b") == "a\\x20b");
}

TEST_CASE("escaped text never contains raw separators") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::string raw;
        size_t len = rng() % 40;
        for (size_t i = 0; i < len; ++i) {
            raw.push_back(static_cast<char>(rng() % 256));
        }
        std::string esc = escape_bytes(raw);
        CHECK(esc.find(' ') == std::string::npos);
        CHECK(esc.find('\t') == std::string::npos);
        CHECK(esc.find('\n') == std::string::npos);
        CHECK(unescape_bytes(esc) == raw);
    }
}

TEST_CASE("unescape_bytes round-trips every single byte value") {
    for (int b = 0; b < 256; ++b) {
        std::string raw(1, static_cast<char>(b));
        CHECK(unescape_bytes(escape_bytes(raw)) == raw);
    }
}

TEST_CASE("unescape_bytes rejects malformed escapes") {
    CHECK_THROWS_AS(unescape_bytes("\\"), Error);
    CHECK_THROWS_AS(unescape_bytes("\\x"), Error);
    CHECK_THROWS_AS(unescape_bytes("\\x2"), Error);
    CHECK_THROWS_AS(unescape_bytes("\\xzz"), Error);
    CHECK_THROWS_AS(unescape_bytes("\\n"), Error);
    try {
        unescape_bytes("\\x@!");
    } catch (const Error & e) {
        CHECK(e.code == "BadEscape");
    }
}

TEST_CASE("is_valid_utf8 accepts well-formed sequences") {
    CHECK(is_valid_utf8(""));
    CHECK(is_valid_utf8("plain ascii"));
    CHECK(is_valid_utf8("caf\xc3\xa9"));
    CHECK(is_valid_utf8("\xe2\x80\x8b"));          // U+200B
    CHECK(is_valid_utf8("\xf0\x9f\x98\x80"));      // U+1F600
}

TEST_CASE("is_valid_utf8 rejects malformed sequences") {
    CHECK_FALSE(is_valid_utf8("\xff"));
    CHECK_FALSE(is_valid_utf8("\xc3"));                 // truncated
    CHECK_FALSE(is_valid_utf8("\xc0\xaf"));             // overlong '/'
    CHECK_FALSE(is_valid_utf8("\xe0\x80\xaf"));         // overlong
    CHECK_FALSE(is_valid_utf8("\xed\xa0\x80"));         // surrogate
    CHECK_FALSE(is_valid_utf8("\xf4\x90\x80\x80"));     // > U+10FFFF
    CHECK_FALSE(is_valid_utf8("a\x80z"));               // stray continuation
}

TEST_CASE("fnv1a64 matches published reference vectors") {
    // Reference values from the FNV-1a 64-bit test suite.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("fnv1a64 seed changes the hash") {
    CHECK(fnv1a64("abc", 1) != fnv1a64("abc", 2));
    CHECK(fnv1a64("abc") == fnv1a64("abc", 14695981039346656037ULL));
}

TEST_CASE("next_unit stays in [0,1) and is pinned by the engine standard") {
    std::mt19937_64 rng;   // default seed 5489
    for (int i = 0; i < 9999; ++i) {
        double u = next_unit(rng);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    // the 10000th draw of a default-seeded mt19937_64 is fixed by the standard
    double expected = static_cast<double>(9981545732273789042ULL >> 11) * 0x1.0p-53;
    CHECK(next_unit(rng) == expected);
}

TEST_CASE("next_index stays in range and covers all buckets") {
    std::mt19937_64 rng(123);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        size_t idx = next_index(rng, 7);
        REQUIRE(idx < 7);
        counts[idx]++;
    }
    for (int c : counts) {
        CHECK(c > 700);   // each bucket near 1000 of 7000
    }
    CHECK(next_index(rng, 1) == 0);
}

TEST_CASE("next_index is deterministic for a given seed") {
    std::mt19937_64 a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(next_index(a, 1000) == next_index(b, 1000));
    }
}

TEST_CASE("shuffle_seeded matches an independently coded Fisher-Yates") {
    std::vector<int> v(25);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> got = v;
    shuffle_seeded(got, 99);

    std::vector<int> expect = v;
    std::mt19937_64 rng(99);
    for (size_t i = expect.size(); i > 1; --i) {
        size_t j = static_cast<size_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
        std::swap(expect[i - 1], expect[j]);
    }
    CHECK(got == expect);
}

TEST_CASE("shuffle_seeded is a permutation and seed-sensitive") {
    std::vector<int> base(100);
    std::iota(base.begin(), base.end(), 0);

    std::vector<int> a = base, b = base, c = base;
    shuffle_seeded(a, 1);
    shuffle_seeded(b, 1);
    shuffle_seeded(c, 2);

    CHECK(a == b);
    CHECK(a != c);
    std::vector<int> sorted_a = a;
    std::sort(sorted_a.begin(), sorted_a.end());
    CHECK(sorted_a == base);

    std::vector<int> empty_v, single{7};
    shuffle_seeded(empty_v, 3);
    shuffle_seeded(single, 3);
    CHECK(empty_v.empty());
    CHECK(single == std::vector<int>{7});
}

TEST_CASE("format_double / parse_double round-trip exactly") {
    std::vector<double> cases = {0.0,
                                 -0.0,
                                 1.0,
                                 0.5,
                                 0.1,
                                 1.0 / 3.0,
                                 3.141592653589793,
                                 -2.5e-7,
                                 1e300,
                                 5e-324,
                                 123456789.123456789,
                                 0.9627,
                                 6.62607015e-34};
    for (double x : cases) {
        double back = parse_double(format_double(x));
        CHECK(back == x);
        CHECK(std::signbit(back) == std::signbit(x));
    }
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        double x = (next_unit(rng) * 2 - 1) * std::pow(10.0, static_cast<double>(rng() % 40) - 20);
        CHECK(parse_double(format_double(x)) == x);
    }
}

TEST_CASE("parse_double rejects junk") {
    CHECK_THROWS_AS(parse_double(""), Error);
    CHECK_THROWS_AS(parse_double("abc"), Error);
    CHECK_THROWS_AS(parse_double("1.5x"), Error);
    try {
        parse_double("nope");
    } catch (const Error & e) {
        CHECK(e.code == "BadNumber");
    }
    CHECK(parse_double("1.5") == 1.5);
    CHECK(parse_double("-3") == -3.0);
}

TEST_CASE("split_lines splits on newline, final fragment counts") {
    CHECK(split_lines("") == std::vector<std::string>{});
    CHECK(split_lines("a\nb\n") == std::vector<std::string>{"a", "b"});
    CHECK(split_lines("a\nb") == std::vector<std::string>{"a", "b"});
    CHECK(split_lines("\n\n") == std::vector<std::string>{"", ""});
    CHECK(split_lines("one") == std::vector<std::string>{"one"});
}

TEST_CASE("lowercase maps only ASCII letters") {
    CHECK(lowercase("AbC09_Z") == "abc09_z");
    CHECK(lowercase("caf\xc3\x89") == "caf\xc3\x89");   // non-ASCII untouched
}

TEST_CASE("read_file and write_file round-trip binary content") {
    std::string path = "util_io_test.bin";
    std::string content("bytes\0with\xffstuff\n", 17);
    write_file(path, content);
    CHECK(read_file(path) == content);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_file("definitely/not/a/file"), Error);
}

TEST_CASE("error carries its code and message") {
    Error e("SomeCode", "something went wrong");
    CHECK(e.code == "SomeCode");
    CHECK(std::string(e.what()) == "SomeCode: something went wrong");
}
