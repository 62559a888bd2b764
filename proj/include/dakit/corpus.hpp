#pragma once

#include "dakit/tokenizer.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dakit::corpus {

// Source categories mirroring the data-blend table rows. Unknown file
// extensions map to Other; Code covers the public GitHub-style sources.
enum class Category {
    BugSummary,
    DesignSource,
    Documentation,
    Verification,
    Other,
    Wikipedia,
    Code,
};

enum class Origin {
    HumanWritten,
    ToolGenerated,
    Unknown,
};

const char * to_string(Category c);
const char * to_string(Origin o);
Category category_from_string(const std::string & s);
Origin origin_from_string(const std::string & s);

// All seven categories in blend-table row order.
const std::vector<Category> & all_categories();

struct DocumentRecord {
    std::string id;        // the normalized relative path; unique per corpus set
    Category category = Category::Other;
    std::string path;      // relative to the ingest root, '/'-separated
    std::string content;   // UTF-8 text (markup already stripped for .html/.htm)
    uint64_t n_lines = 0;  // newline-delimited; an unterminated tail counts as a line
    std::string checksum;  // SHA-256 of normalized content, lowercase hex
    Origin origin = Origin::Unknown;
};

struct FilterPolicy {
    uint64_t min_lines = 0;
    std::optional<uint64_t> max_lines;             // unbounded when absent
    std::map<std::string, Category> extension_map; // extension without dot, lowercase
    bool normalize_whitespace_for_checksum = false;
    // Case-insensitive substrings scanned in the head of each file; a match
    // classifies the file as ToolGenerated.
    std::vector<std::string> generated_banners = {"auto-generated", "automatically generated",
                                                  "generated by", "do not edit"};

    static FilterPolicy defaults();
    static FilterPolicy from_json(const std::string & json_text);
    std::string to_json() const;
};

struct IngestWarning {
    std::string path;
    std::string reason;
};

uint64_t count_lines(std::string_view content);

// SHA-256 (lowercase hex) of content. With normalize=true, CRLF is folded to
// LF and trailing spaces/tabs are stripped from every line first.
std::string checksum_content(std::string_view content, bool normalize);

// Minimal tag stripper: removes <...> spans, decodes &amp; &lt; &gt; &quot;
// &#39;, keeps <pre>/<code> block contents byte-for-byte (minus the tags),
// and emits malformed tags (unclosed '<', or '<' not starting a tag)
// literally.
std::string strip_markup(std::string_view html_text);

// Walks root_dir, classifies by extension, filters by line count, strips
// markup from .html/.htm, and returns records sorted by path. Files that are
// not valid UTF-8 are skipped with a warning. Throws Error("MissingRoot")
// when root_dir does not exist.
std::vector<DocumentRecord> ingest(const std::string & root_dir, const FilterPolicy & policy,
                                   std::vector<IngestWarning> * warnings = nullptr);

// Keeps one record per distinct checksum: the lexicographically first path
// wins; output preserves input order.
std::vector<DocumentRecord> dedup(const std::vector<DocumentRecord> & records);

std::map<Category, uint64_t> count_tokens(const std::vector<DocumentRecord> & records,
                                          const tok::TokenizerModel & tokenizer);

// JSONL, one record per line, fields exactly:
// id, category, path, content, n_lines, checksum, origin.
std::string to_jsonl(const std::vector<DocumentRecord> & records);
std::vector<DocumentRecord> from_jsonl(const std::string & jsonl_text);

} // namespace dakit::corpus
