#pragma once

#include "dakit/corpus.hpp"
#include "dakit/genclient.hpp"
#include "dakit/matrix.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dakit::retrieval {

struct Passage {
    std::string pid;      // "docid#seq"
    std::string doc_id;
    std::string text;     // at most chunk_size characters
    size_t char_start = 0;
};

// Fixed-size windows starting at multiples of (chunk_size - overlap); the
// final window may be short. Throws Error("BadOverlap") unless
// 0 <= overlap < chunk_size.
std::vector<Passage> chunk(const corpus::DocumentRecord & doc, size_t chunk_size = 512,
                           size_t overlap = 0);
std::vector<Passage> chunk_text(const std::string & doc_id, std::string_view text,
                                size_t chunk_size = 512, size_t overlap = 0);

// Lowercased terms split on whitespace and punctuation (ASCII alnum runs;
// bytes >= 0x80 stay inside terms).
std::vector<std::string> text_terms(std::string_view text);

// Linear projection of hashed character n-grams (n in {3,4,5}) followed by
// L2 normalization. A deliberately small, CPU-trainable dense encoder that
// exercises the contrastive fine-tuning pipeline.
struct DenseEmbedder {
    Matrix projection;          // buckets x dim
    double temperature = 0.05;  // contrastive softmax temperature

    size_t buckets() const { return projection.rows; }
    size_t dim() const { return projection.cols; }

    static DenseEmbedder random(size_t buckets, size_t dim, double temperature, uint64_t seed);

    // bucket -> n-gram count, deterministic per text
    std::vector<std::pair<size_t, double>> features(std::string_view text) const;
    std::vector<double> embed(std::string_view text) const;

    void save(const std::string & path_prefix) const;   // .emb + .meta.json
    static DenseEmbedder load(const std::string & path_prefix);
};

struct PassageIndex {
    std::vector<Passage> passages;
    std::vector<std::unordered_map<std::string, int>> term_freqs;  // per passage
    std::vector<size_t> doc_lens;
    std::unordered_map<std::string, int> doc_freqs;
    double avg_doc_len = 0.0;
    std::unordered_map<std::string, size_t> pid_to_idx;
    std::optional<Matrix> dense_vectors;   // unit-norm rows, parallel to passages

    static PassageIndex build(std::vector<Passage> passages);
    size_t size() const { return passages.size(); }
    size_t index_of(const std::string & pid) const;   // throws Error("UnknownPid")

    void build_dense(const DenseEmbedder & embedder);

    void save(const std::string & path_prefix) const;  // .passages.jsonl + optional .emb
    static PassageIndex load(const std::string & path_prefix);
};

// Okapi BM25 with k1=1.2, b=0.75, idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)).
double bm25_score(const PassageIndex & index, std::string_view query, const std::string & pid);

struct Scorer {
    enum class Kind { BM25, Dense } kind = Kind::BM25;
    const DenseEmbedder * embedder = nullptr;   // required for Dense

    static Scorer bm25() { return {Kind::BM25, nullptr}; }
    static Scorer dense(const DenseEmbedder & e) { return {Kind::Dense, &e}; }
};

// Top-k by score descending, ties by ascending pid. k past the index size
// returns everything. Throws Error("EmptyIndex").
std::vector<std::pair<std::string, double>> retrieve(const PassageIndex & index,
                                                     std::string_view query, size_t k,
                                                     const Scorer & scorer);

struct RetrievalSample {
    std::string query;
    std::vector<std::string> positives;          // >= 1, seed passage first
    std::vector<std::string> hard_negatives;     // judged negative among fetched
    std::vector<std::string> filler_negatives;   // random non-positive fill
};

std::string samples_to_jsonl(const std::vector<RetrievalSample> & samples);
std::vector<RetrievalSample> samples_from_jsonl(const std::string & jsonl_text);

struct SampleGenOptions {
    size_t n_fetch = 10;
    size_t n_neg = 7;
    // {passage} / {query} slots
    std::string qgen_prompt = "Generate one question that the following passage answers.\n"
                              "Passage:\n{passage}\nQuestion:";
    std::string judge_prompt = "Query: {query}\nPassage:\n{passage}\n"
                               "Reply POS if the passage answers the query, otherwise NEG.";
};

// One sample per iteration: draw a seed passage uniformly, have qgen write a
// query for it, fetch top-n_fetch candidates with the baseline scorer, have
// the judge label each candidate POS/NEG, keep negatives as hard negatives
// (ranked order, capped at n_neg) and fill the remainder with uniformly
// random non-positive passages. The seed passage is always kept positive; a
// judge rejection of it is recorded in disagreements. The judge must answer
// exactly "POS" or "NEG".
std::vector<RetrievalSample> generate_samples(const PassageIndex & index, size_t n_samples,
                                              const gen::GenerationClient & qgen,
                                              const gen::GenerationClient & judge,
                                              const Scorer & baseline, const SampleGenOptions & opt,
                                              uint64_t rng_seed,
                                              std::vector<std::string> * disagreements = nullptr);

struct LossResult {
    double loss = 0.0;
    Matrix gradient;   // d loss / d projection, buckets x dim
};

// InfoNCE over one positive against all negatives, score = cosine / tau,
// averaged over the sample's positives. Exact analytic gradient.
LossResult contrastive_loss(const DenseEmbedder & embedder, const RetrievalSample & sample,
                            const PassageIndex & index);

struct TrainResult {
    DenseEmbedder embedder;
    std::vector<double> epoch_losses;   // mean loss per epoch, pre-update
};

// Plain SGD at a fixed learning rate, sample order reshuffled per epoch from
// rng_seed. Deterministic.
TrainResult train_embedder(DenseEmbedder init, const std::vector<RetrievalSample> & samples,
                           const PassageIndex & index, size_t epochs, double learning_rate,
                           uint64_t rng_seed);

enum class QueryCategory { Specs, Testbench, Build };
const char * to_string(QueryCategory c);
QueryCategory query_category_from_string(const std::string & s);

struct EvalQuery {
    std::string query;
    std::vector<std::string> golden_pids;   // nonempty, must exist in the index
    QueryCategory category = QueryCategory::Specs;
};

std::string eval_queries_to_jsonl(const std::vector<EvalQuery> & queries);
std::vector<EvalQuery> eval_queries_from_jsonl(const std::string & jsonl_text);

struct HitRateReport {
    std::map<std::string, double> per_category;
    double overall = 0.0;
};

// hit(q) = 1 iff any golden pid appears in the top-k.
HitRateReport hit_rate(const PassageIndex & index, const std::vector<EvalQuery> & queries,
                       size_t k, const Scorer & scorer);

} // namespace dakit::retrieval
