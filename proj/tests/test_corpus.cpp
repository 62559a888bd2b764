#include <doctest.h>

#include "dakit/corpus.hpp"
#include "dakit/error.hpp"
#include "dakit/tokenizer.hpp"
#include "dakit/util.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

using namespace dakit;
using namespace dakit::corpus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string & tag) {
        path = fs::temp_directory_path() / ("dakit_test_" + tag + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void put(const std::string & rel, const std::string & content) const {
        fs::path p = path / rel;
        fs::create_directories(p.parent_path());
        write_file(p.string(), content);
    }
};

} // namespace

TEST_CASE("strip_markup removes simple tags") {
    CHECK(strip_markup("<p>hi</p>") == "hi");
    CHECK(strip_markup("<div class=\"x\">a</div><br/>b") == "ab");
    CHECK(strip_markup("no tags at all") == "no tags at all");
}

TEST_CASE("strip_markup decodes the five basic entities") {
    CHECK(strip_markup("a &lt; b") == "a < b");
    CHECK(strip_markup("&amp;&gt;&quot;&#39;") == "&>\"'");
    CHECK(strip_markup("&unknown;") == "&unknown;");
}

TEST_CASE("strip_markup keeps code and pre blocks verbatim") {
    CHECK(strip_markup("<code>x<y</code>") == "x<y");
    CHECK(strip_markup("<pre>  if (a < b) { }\n</pre>") == "  if (a < b) { }\n");
    CHECK(strip_markup("<CODE>A&amp;B</CODE>") == "A&amp;B");   // entities stay raw inside
}

TEST_CASE("strip_markup emits malformed tags literally") {
    CHECK(strip_markup("x < y") == "x < y");                    // '<' not starting a tag
    CHECK(strip_markup("trailing <unclosed") == "trailing <unclosed");
    CHECK(strip_markup("a <!-- gone --> b") == "a  b");
}

TEST_CASE("strip_markup never grows text except via entity decoding") {
    std::vector<std::string> inputs = {"<p>hi</p>", "plain", "<b><i>x</i></b>",
                                       "a &lt; b", "<code>x<y</code>", "x < y"};
    for (const auto & in : inputs) {
        CHECK(strip_markup(in).size() <= in.size());
    }
}

TEST_CASE("count_lines counts newline-delimited lines, tail included") {
    CHECK(count_lines("") == 0);
    CHECK(count_lines("a") == 1);
    CHECK(count_lines("a\n") == 1);
    CHECK(count_lines("a\nb") == 2);
    CHECK(count_lines("a\nb\n") == 2);
    CHECK(count_lines("\n\n\n") == 3);
}

TEST_CASE("checksum_content matches the published SHA-256 vectors") {
    CHECK(checksum_content("abc", false) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(checksum_content("", false) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("checksum normalization folds CRLF and trailing blanks") {
    CHECK(checksum_content("a \r\nb\t\r\n", true) == checksum_content("a\nb\n", false));
    CHECK(checksum_content("line  ", true) == checksum_content("line", false));
    CHECK(checksum_content("a \nb", false) != checksum_content("a\nb", false));
    // interior whitespace survives normalization
    CHECK(checksum_content("a  b", true) == checksum_content("a  b", false));
}

TEST_CASE("re-hashing content reproduces the stored checksum") {
    TempDir dir("rehash");
    dir.put("x.txt", "some\ncontent\n");
    auto records = ingest(dir.path.string(), FilterPolicy::defaults());
    REQUIRE(records.size() == 1);
    CHECK(checksum_content(records[0].content, false) == records[0].checksum);
}

TEST_CASE("ingest classifies a 3-line tcl file") {
    TempDir dir("tcl");
    dir.put("run.tcl", "set a 1\nset b 2\nset c 3\n");
    FilterPolicy policy = FilterPolicy::defaults();
    policy.min_lines = 1;
    auto records = ingest(dir.path.string(), policy);
    REQUIRE(records.size() == 1);
    CHECK(records[0].path == "run.tcl");
    CHECK(records[0].category == Category::Code);
    CHECK(records[0].n_lines == 3);
}

TEST_CASE("ingest excludes files below min_lines") {
    TempDir dir("minlines");
    dir.put("short.txt", "one\ntwo\n");
    FilterPolicy policy = FilterPolicy::defaults();
    policy.min_lines = 5;
    CHECK(ingest(dir.path.string(), policy).empty());
    policy.min_lines = 2;
    CHECK(ingest(dir.path.string(), policy).size() == 1);
}

TEST_CASE("ingest sorts output by path") {
    TempDir dir("sort");
    dir.put("b.txt", "bee\n");
    dir.put("a.txt", "ay\n");
    auto records = ingest(dir.path.string(), FilterPolicy::defaults());
    REQUIRE(records.size() == 2);
    CHECK(records[0].path == "a.txt");
    CHECK(records[1].path == "b.txt");
}

TEST_CASE("ingest throws MissingRoot for an absent directory") {
    CHECK_THROWS_AS(ingest("/no/such/root/anywhere", FilterPolicy::defaults()), Error);
    try {
        ingest("/no/such/root/anywhere", FilterPolicy::defaults());
    } catch (const Error & e) {
        CHECK(e.code == "MissingRoot");
    }
}

TEST_CASE("ingest skips non-UTF8 files with a warning") {
    TempDir dir("utf8");
    dir.put("good.txt", "fine\n");
    dir.put("bad.bin", std::string("\xff\xfe garbage", 11));
    std::vector<IngestWarning> warnings;
    auto records = ingest(dir.path.string(), FilterPolicy::defaults(), &warnings);
    REQUIRE(records.size() == 1);
    CHECK(records[0].path == "good.txt");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].path == "bad.bin");
}

TEST_CASE("ingest strips markup from html files and maps unknown extensions to Other") {
    TempDir dir("html");
    dir.put("page.html", "<p>hello</p>\n");
    dir.put("data.xyz", "mystery\n");
    auto records = ingest(dir.path.string(), FilterPolicy::defaults());
    REQUIRE(records.size() == 2);
    CHECK(records[1].path == "page.html");
    CHECK(records[1].content == "hello\n");
    CHECK(records[1].category == Category::Documentation);
    CHECK(records[0].path == "data.xyz");
    CHECK(records[0].category == Category::Other);
}

TEST_CASE("ingest tags banner-bearing files as tool-generated") {
    TempDir dir("origin");
    dir.put("gen.v", "// Auto-Generated by flowtool. DO NOT EDIT\nmodule m; endmodule\n");
    dir.put("hand.v", "module n; endmodule\n");
    auto records = ingest(dir.path.string(), FilterPolicy::defaults());
    REQUIRE(records.size() == 2);
    CHECK(records[0].path == "gen.v");
    CHECK(records[0].origin == Origin::ToolGenerated);
    CHECK(records[1].origin == Origin::Unknown);
}

TEST_CASE("dedup keeps the lexicographically first path per checksum") {
    TempDir dir("dedup");
    dir.put("z/copy.txt", "same bytes\n");
    dir.put("a/orig.txt", "same bytes\n");
    dir.put("unique.txt", "different\n");
    auto records = ingest(dir.path.string(), FilterPolicy::defaults());
    REQUIRE(records.size() == 3);
    auto kept = dedup(records);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].path == "a/orig.txt");
    CHECK(kept[1].path == "unique.txt");
}

TEST_CASE("dedup without normalization keeps whitespace variants") {
    DocumentRecord a, b;
    a.path = "a.txt";
    a.content = "text";
    a.checksum = checksum_content(a.content, false);
    b.path = "b.txt";
    b.content = "text ";
    b.checksum = checksum_content(b.content, false);
    CHECK(dedup({a, b}).size() == 2);

    // with normalization the checksums collapse and one survives
    a.checksum = checksum_content(a.content, true);
    b.checksum = checksum_content(b.content, true);
    auto kept = dedup({a, b});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].path == "a.txt");
}

TEST_CASE("dedup of empty input is empty and dedup is idempotent") {
    CHECK(dedup({}).empty());
    TempDir dir("idem");
    dir.put("p.txt", "alpha\n");
    dir.put("q.txt", "alpha\n");
    dir.put("r.txt", "beta\n");
    auto once = dedup(ingest(dir.path.string(), FilterPolicy::defaults()));
    auto twice = dedup(once);
    CHECK(to_jsonl(once) == to_jsonl(twice));
}

TEST_CASE("count_tokens sums per category under a tokenizer") {
    auto tok = tok::TokenizerModel::byte_level();
    DocumentRecord r;
    r.category = Category::Documentation;
    r.content = "7 bytes";   // 7 tokens under the byte tokenizer
    auto counts = count_tokens({r}, tok);
    CHECK(counts.at(Category::Documentation) == 7);
    CHECK(counts.at(Category::Code) == 0);

    auto empty_counts = count_tokens({}, tok);
    for (const auto & [cat, n] : empty_counts) {
        CHECK(n == 0);
    }

    DocumentRecord a, b;
    a.category = Category::Code;
    a.content = "abc";
    b.category = Category::Wikipedia;
    b.content = "defgh";
    auto two = count_tokens({a, b}, tok);
    CHECK(two.at(Category::Code) == 3);
    CHECK(two.at(Category::Wikipedia) == 5);
    uint64_t total = 0;
    for (const auto & [cat, n] : two) total += n;
    uint64_t recount = tok.count_tokens(a.content) + tok.count_tokens(b.content);
    CHECK(total == recount);
}

TEST_CASE("jsonl round-trips records with exact field names") {
    DocumentRecord r;
    r.id = "docs/readme.md";
    r.category = Category::Documentation;
    r.path = "docs/readme.md";
    r.content = "line1\nline2\n";
    r.n_lines = 2;
    r.checksum = checksum_content(r.content, false);
    r.origin = Origin::HumanWritten;

    std::string jsonl = to_jsonl({r});
    CHECK(jsonl.find("\"id\":") != std::string::npos);
    CHECK(jsonl.find("\"category\":\"Documentation\"") != std::string::npos);
    CHECK(jsonl.find("\"path\":") != std::string::npos);
    CHECK(jsonl.find("\"content\":") != std::string::npos);
    CHECK(jsonl.find("\"n_lines\":2") != std::string::npos);
    CHECK(jsonl.find("\"checksum\":") != std::string::npos);
    CHECK(jsonl.find("\"origin\":\"HumanWritten\"") != std::string::npos);

    auto back = from_jsonl(jsonl);
    REQUIRE(back.size() == 1);
    CHECK(back[0].id == r.id);
    CHECK(back[0].category == r.category);
    CHECK(back[0].path == r.path);
    CHECK(back[0].content == r.content);
    CHECK(back[0].n_lines == r.n_lines);
    CHECK(back[0].checksum == r.checksum);
    CHECK(back[0].origin == r.origin);
    CHECK(to_jsonl(back) == jsonl);
}

TEST_CASE("identical trees produce byte-identical jsonl") {
    TempDir one("det1"), two("det2");
    for (const TempDir * dir : {&one, &two}) {
        dir->put("a/x.v", "module x; endmodule\n");
        dir->put("b/y.md", "# title\nbody\n");
        dir->put("c/z.html", "<p>para</p>\n");
    }
    auto ra = ingest(one.path.string(), FilterPolicy::defaults());
    auto rb = ingest(two.path.string(), FilterPolicy::defaults());
    CHECK(to_jsonl(dedup(ra)) == to_jsonl(dedup(rb)));
}

TEST_CASE("category and origin string conversions round-trip") {
    for (Category c : all_categories()) {
        CHECK(category_from_string(to_string(c)) == c);
    }
    for (Origin o : {Origin::HumanWritten, Origin::ToolGenerated, Origin::Unknown}) {
        CHECK(origin_from_string(to_string(o)) == o);
    }
    CHECK_THROWS_AS(category_from_string("NotACategory"), Error);
    CHECK_THROWS_AS(origin_from_string("NotAnOrigin"), Error);
}

TEST_CASE("filter policy json round-trips and rejects unknown keys") {
    FilterPolicy p = FilterPolicy::defaults();
    p.min_lines = 3;
    p.max_lines = 900;
    p.normalize_whitespace_for_checksum = true;
    FilterPolicy back = FilterPolicy::from_json(p.to_json());
    CHECK(back.min_lines == 3);
    REQUIRE(back.max_lines.has_value());
    CHECK(*back.max_lines == 900);
    CHECK(back.normalize_whitespace_for_checksum == true);
    CHECK(back.extension_map == p.extension_map);

    CHECK_THROWS_AS(FilterPolicy::from_json("{\"bogus\": 1}"), Error);
    CHECK_THROWS_AS(FilterPolicy::from_json("{\"min_lines\": 9, \"max_lines\": 2}"), Error);
}
