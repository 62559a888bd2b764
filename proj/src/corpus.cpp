#include "dakit/corpus.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <unordered_map>

namespace fs = std::filesystem;

namespace dakit::corpus {

const char * to_string(Category c) {
    switch (c) {
        case Category::BugSummary:    return "BugSummary";
        case Category::DesignSource:  return "DesignSource";
        case Category::Documentation: return "Documentation";
        case Category::Verification:  return "Verification";
        case Category::Other:         return "Other";
        case Category::Wikipedia:     return "Wikipedia";
        case Category::Code:          return "Code";
    }
    return "Other";
}

const char * to_string(Origin o) {
    switch (o) {
        case Origin::HumanWritten:  return "HumanWritten";
        case Origin::ToolGenerated: return "ToolGenerated";
        case Origin::Unknown:       return "Unknown";
    }
    return "Unknown";
}

Category category_from_string(const std::string & s) {
    for (Category c : all_categories()) {
        if (s == to_string(c)) return c;
    }
    throw Error("BadCategory", "unknown category \"" + s + "\"");
}

Origin origin_from_string(const std::string & s) {
    for (Origin o : {Origin::HumanWritten, Origin::ToolGenerated, Origin::Unknown}) {
        if (s == to_string(o)) return o;
    }
    throw Error("BadOrigin", "unknown origin \"" + s + "\"");
}

const std::vector<Category> & all_categories() {
    static const std::vector<Category> cats = {
        Category::BugSummary, Category::DesignSource, Category::Documentation,
        Category::Verification, Category::Other, Category::Wikipedia, Category::Code,
    };
    return cats;
}

uint64_t count_lines(std::string_view content) {
    if (content.empty()) return 0;
    uint64_t n = static_cast<uint64_t>(std::count(content.begin(), content.end(), '\n'));
    if (content.back() != '\n') n += 1;
    return n;
}

static std::string normalize_for_checksum(std::string_view content) {
    std::string out;
    out.reserve(content.size());
    std::string pending_ws;
    for (size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
            continue;   // CRLF -> LF
        }
        if (c == ' ' || c == '\t') {
            pending_ws.push_back(c);
            continue;
        }
        if (c == '\n') {
            pending_ws.clear();   // drop trailing blanks on the line
        } else {
            out += pending_ws;
            pending_ws.clear();
        }
        out.push_back(c);
    }
    return out;   // trailing blanks at EOF dropped too
}

std::string checksum_content(std::string_view content, bool normalize) {
    std::string normalized;
    if (normalize) {
        normalized = normalize_for_checksum(content);
        content = normalized;
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw Error("ChecksumFailed", "SHA-256 computation failed");
    }
    static const char * hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// --- markup stripping ---

static bool iequals_at(std::string_view text, size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (size_t i = 0; i < word.size(); ++i) {
        char a = text[pos + i];
        char b = word[i];
        if (a >= 'A' && a <= 'Z') a += 32;
        if (b >= 'A' && b <= 'Z') b += 32;
        if (a != b) return false;
    }
    return true;
}

static size_t ifind(std::string_view text, std::string_view needle, size_t from) {
    if (needle.empty()) return from;
    for (size_t i = from; i + needle.size() <= text.size(); ++i) {
        if (iequals_at(text, i, needle)) return i;
    }
    return std::string_view::npos;
}

std::string strip_markup(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '&') {
            struct Ent { std::string_view name; char ch; };
            static const Ent ents[] = {
                {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''},
            };
            bool decoded = false;
            for (const auto & e : ents) {
                if (text.substr(i, e.name.size()) == e.name) {
                    out.push_back(e.ch);
                    i += e.name.size();
                    decoded = true;
                    break;
                }
            }
            if (!decoded) {
                out.push_back(c);
                ++i;
            }
            continue;
        }
        if (c != '<') {
            out.push_back(c);
            ++i;
            continue;
        }
        // '<' starts a tag only before a letter, '/', '!' or '?'
        if (i + 1 >= text.size()) {
            out.push_back(c);
            ++i;
            continue;
        }
        char nxt = text[i + 1];
        bool tagish = (nxt >= 'a' && nxt <= 'z') || (nxt >= 'A' && nxt <= 'Z') ||
                      nxt == '/' || nxt == '!' || nxt == '?';
        if (!tagish) {
            out.push_back(c);
            ++i;
            continue;
        }
        if (text.substr(i, 4) == "<!--") {
            size_t end = text.find("-->", i + 4);
            if (end == std::string_view::npos) {
                out.append(text.substr(i));
                break;
            }
            i = end + 3;
            continue;
        }
        // <pre>/<code>: copy content verbatim up to the matching close tag
        std::string_view block;
        if (iequals_at(text, i, "<pre")) block = "pre";
        else if (iequals_at(text, i, "<code")) block = "code";
        if (!block.empty()) {
            size_t open_end = text.find('>', i);
            if (open_end == std::string_view::npos) {
                out.append(text.substr(i));   // unclosed tag: literal
                break;
            }
            std::string close = "</" + std::string(block) + ">";
            size_t close_pos = ifind(text, close, open_end + 1);
            if (close_pos == std::string_view::npos) {
                out.append(text.substr(open_end + 1));   // no close: rest is verbatim
                break;
            }
            out.append(text.substr(open_end + 1, close_pos - open_end - 1));
            i = close_pos + close.size();
            continue;
        }
        size_t end = text.find('>', i);
        if (end == std::string_view::npos) {
            out.append(text.substr(i));   // unclosed '<...': emit literally
            break;
        }
        i = end + 1;
    }
    return out;
}

// --- ingestion ---

FilterPolicy FilterPolicy::defaults() {
    FilterPolicy p;
    p.min_lines = 0;
    p.extension_map = {
        {"v", Category::DesignSource},    {"sv", Category::DesignSource},
        {"vhd", Category::DesignSource},  {"vhdl", Category::DesignSource},
        {"spice", Category::DesignSource},{"sp", Category::DesignSource},
        {"svh", Category::Verification},  {"vt", Category::Verification},
        {"md", Category::Documentation},  {"txt", Category::Documentation},
        {"html", Category::Documentation},{"htm", Category::Documentation},
        {"rst", Category::Documentation},
        {"bug", Category::BugSummary},
        {"wiki", Category::Wikipedia},
        {"c", Category::Code},   {"cc", Category::Code},  {"cpp", Category::Code},
        {"h", Category::Code},   {"hpp", Category::Code}, {"py", Category::Code},
        {"tcl", Category::Code}, {"sh", Category::Code},  {"pl", Category::Code},
    };
    return p;
}

static std::string extension_of(const std::string & path) {
    size_t slash = path.find_last_of('/');
    size_t dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return "";
    }
    return lowercase(std::string_view(path).substr(dot + 1));
}

static Origin classify_origin(std::string_view content, const FilterPolicy & policy) {
    const size_t head_len = std::min<size_t>(content.size(), 2048);
    std::string head = lowercase(content.substr(0, head_len));
    for (const auto & banner : policy.generated_banners) {
        if (head.find(lowercase(banner)) != std::string::npos) {
            return Origin::ToolGenerated;
        }
    }
    return Origin::Unknown;
}

std::vector<DocumentRecord> ingest(const std::string & root_dir, const FilterPolicy & policy,
                                   std::vector<IngestWarning> * warnings) {
    fs::path root(root_dir);
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw Error("MissingRoot", "ingest root does not exist: " + root_dir);
    }
    if (policy.max_lines && policy.min_lines > *policy.max_lines) {
        throw Error("BadPolicy", "min_lines exceeds max_lines");
    }

    std::vector<std::string> rel_paths;
    for (const auto & entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        rel_paths.push_back(entry.path().lexically_relative(root).generic_string());
    }
    std::sort(rel_paths.begin(), rel_paths.end());

    std::vector<DocumentRecord> records;
    for (const auto & rel : rel_paths) {
        std::string raw;
        try {
            raw = read_file((root / rel).string());
        } catch (const Error & e) {
            if (warnings) warnings->push_back({rel, e.what()});
            continue;
        }
        if (!is_valid_utf8(raw)) {
            if (warnings) warnings->push_back({rel, "not valid UTF-8, skipped"});
            continue;
        }
        std::string ext = extension_of(rel);
        std::string content = (ext == "html" || ext == "htm") ? strip_markup(raw) : std::move(raw);

        uint64_t n_lines = count_lines(content);
        if (n_lines < policy.min_lines) continue;
        if (policy.max_lines && n_lines > *policy.max_lines) continue;

        DocumentRecord rec;
        rec.id = rel;
        rec.path = rel;
        auto it = policy.extension_map.find(ext);
        rec.category = it == policy.extension_map.end() ? Category::Other : it->second;
        rec.origin = classify_origin(content, policy);
        rec.n_lines = n_lines;
        rec.checksum = checksum_content(content, policy.normalize_whitespace_for_checksum);
        rec.content = std::move(content);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<DocumentRecord> dedup(const std::vector<DocumentRecord> & records) {
    // winner per checksum = lexicographically first path (first seen on ties)
    std::unordered_map<std::string, size_t> winner;
    for (size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = winner.emplace(records[i].checksum, i);
        if (!inserted && records[i].path < records[it->second].path) {
            it->second = i;
        }
    }
    std::vector<DocumentRecord> out;
    out.reserve(winner.size());
    for (size_t i = 0; i < records.size(); ++i) {
        if (winner.at(records[i].checksum) == i) {
            out.push_back(records[i]);
        }
    }
    return out;
}

std::map<Category, uint64_t> count_tokens(const std::vector<DocumentRecord> & records,
                                          const tok::TokenizerModel & tokenizer) {
    std::map<Category, uint64_t> counts;
    for (Category c : all_categories()) {
        counts[c] = 0;
    }
    for (const auto & rec : records) {
        counts[rec.category] += tokenizer.count_tokens(rec.content);
    }
    return counts;
}

// --- JSONL ---

std::string to_jsonl(const std::vector<DocumentRecord> & records) {
    std::string out;
    for (const auto & rec : records) {
        nlohmann::ordered_json j;
        j["id"] = rec.id;
        j["category"] = to_string(rec.category);
        j["path"] = rec.path;
        j["content"] = rec.content;
        j["n_lines"] = rec.n_lines;
        j["checksum"] = rec.checksum;
        j["origin"] = to_string(rec.origin);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<DocumentRecord> from_jsonl(const std::string & jsonl_text) {
    std::vector<DocumentRecord> records;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        DocumentRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.category = category_from_string(j.at("category").get<std::string>());
        rec.path = j.at("path").get<std::string>();
        rec.content = j.at("content").get<std::string>();
        rec.n_lines = j.at("n_lines").get<uint64_t>();
        rec.checksum = j.at("checksum").get<std::string>();
        rec.origin = origin_from_string(j.at("origin").get<std::string>());
        records.push_back(std::move(rec));
    }
    return records;
}

FilterPolicy FilterPolicy::from_json(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    FilterPolicy p = defaults();
    for (const auto & [key, val] : j.items()) {
        if (key == "min_lines") {
            p.min_lines = val.get<uint64_t>();
        } else if (key == "max_lines") {
            if (val.is_null()) p.max_lines.reset();
            else p.max_lines = val.get<uint64_t>();
        } else if (key == "extension_map") {
            p.extension_map.clear();
            for (const auto & [ext, cat] : val.items()) {
                p.extension_map[lowercase(ext)] = category_from_string(cat.get<std::string>());
            }
        } else if (key == "normalize_whitespace_for_checksum") {
            p.normalize_whitespace_for_checksum = val.get<bool>();
        } else if (key == "generated_banners") {
            p.generated_banners = val.get<std::vector<std::string>>();
        } else {
            throw Error("BadPolicy", "unknown policy key \"" + key + "\"");
        }
    }
    if (p.max_lines && p.min_lines > *p.max_lines) {
        throw Error("BadPolicy", "min_lines exceeds max_lines");
    }
    return p;
}

std::string FilterPolicy::to_json() const {
    nlohmann::ordered_json j;
    j["min_lines"] = min_lines;
    if (max_lines) j["max_lines"] = *max_lines;
    else j["max_lines"] = nullptr;
    nlohmann::ordered_json em = nlohmann::ordered_json::object();
    for (const auto & [ext, cat] : extension_map) {
        em[ext] = to_string(cat);
    }
    j["extension_map"] = em;
    j["normalize_whitespace_for_checksum"] = normalize_whitespace_for_checksum;
    j["generated_banners"] = generated_banners;
    return j.dump(2) + "\n";
}

} // namespace dakit::corpus
