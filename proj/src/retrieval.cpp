#include "dakit/retrieval.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

namespace dakit::retrieval {

std::vector<Passage> chunk_text(const std::string & doc_id, std::string_view text,
                                size_t chunk_size, size_t overlap) {
    if (overlap >= chunk_size) {
        throw Error("BadOverlap", "overlap must satisfy 0 <= overlap < chunk_size");
    }
    std::vector<Passage> out;
    const size_t stride = chunk_size - overlap;
    size_t seq = 0;
    for (size_t start = 0; start < text.size(); start += stride, ++seq) {
        Passage p;
        p.pid = doc_id + "#" + std::to_string(seq);
        p.doc_id = doc_id;
        p.char_start = start;
        p.text = std::string(text.substr(start, chunk_size));
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Passage> chunk(const corpus::DocumentRecord & doc, size_t chunk_size, size_t overlap) {
    return chunk_text(doc.id, doc.content, chunk_size, overlap);
}

std::vector<std::string> text_terms(std::string_view text) {
    std::vector<std::string> terms;
    std::string cur;
    for (unsigned char c : text) {
        bool term_char = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                         (c >= '0' && c <= '9') || c >= 0x80;
        if (term_char) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : static_cast<char>(c));
        } else if (!cur.empty()) {
            terms.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        terms.push_back(std::move(cur));
    }
    return terms;
}

// --- dense embedder ---

DenseEmbedder DenseEmbedder::random(size_t buckets, size_t dim, double temperature, uint64_t seed) {
    DenseEmbedder e;
    e.projection = Matrix(buckets, dim);
    e.temperature = temperature;
    std::mt19937_64 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(buckets));
    for (double & v : e.projection.data) {
        v = (next_unit(rng) * 2.0 - 1.0) * scale;
    }
    return e;
}

std::vector<std::pair<size_t, double>> DenseEmbedder::features(std::string_view text) const {
    std::unordered_map<size_t, double> counts;
    const size_t f = buckets();
    for (size_t n = 3; n <= 5; ++n) {
        if (text.size() < n) break;
        const uint64_t salt = 0x100001b3ULL * n;
        for (size_t i = 0; i + n <= text.size(); ++i) {
            size_t bucket = static_cast<size_t>(fnv1a64(text.substr(i, n), salt) % f);
            counts[bucket] += 1.0;
        }
    }
    std::vector<std::pair<size_t, double>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> DenseEmbedder::embed(std::string_view text) const {
    std::vector<double> u(dim(), 0.0);
    for (const auto & [bucket, count] : features(text)) {
        const double * row = projection.row(bucket);
        for (size_t c = 0; c < u.size(); ++c) {
            u[c] += count * row[c];
        }
    }
    double norm2 = 0.0;
    for (double v : u) norm2 += v * v;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double & v : u) v *= inv;
    }
    return u;
}

void DenseEmbedder::save(const std::string & path_prefix) const {
    emb1_save(projection, path_prefix + ".emb");
    nlohmann::ordered_json meta;
    meta["temperature"] = temperature;
    write_file(path_prefix + ".meta.json", meta.dump(2) + "\n");
}

DenseEmbedder DenseEmbedder::load(const std::string & path_prefix) {
    DenseEmbedder e;
    e.projection = emb1_load(path_prefix + ".emb");
    auto meta = nlohmann::json::parse(read_file(path_prefix + ".meta.json"));
    e.temperature = meta.at("temperature").get<double>();
    return e;
}

// --- passage index ---

PassageIndex PassageIndex::build(std::vector<Passage> passages) {
    PassageIndex idx;
    idx.passages = std::move(passages);
    idx.term_freqs.resize(idx.passages.size());
    idx.doc_lens.resize(idx.passages.size());
    size_t total_len = 0;
    for (size_t i = 0; i < idx.passages.size(); ++i) {
        auto terms = text_terms(idx.passages[i].text);
        idx.doc_lens[i] = terms.size();
        total_len += terms.size();
        auto & tf = idx.term_freqs[i];
        for (auto & t : terms) {
            tf[std::move(t)] += 1;
        }
        for (const auto & [t, _] : tf) {
            idx.doc_freqs[t] += 1;
        }
        if (!idx.pid_to_idx.emplace(idx.passages[i].pid, i).second) {
            throw Error("DuplicatePid", "pid appears twice: " + idx.passages[i].pid);
        }
    }
    idx.avg_doc_len = idx.passages.empty() ? 0.0
        : static_cast<double>(total_len) / static_cast<double>(idx.passages.size());
    return idx;
}

size_t PassageIndex::index_of(const std::string & pid) const {
    auto it = pid_to_idx.find(pid);
    if (it == pid_to_idx.end()) {
        throw Error("UnknownPid", "no passage with pid " + pid);
    }
    return it->second;
}

void PassageIndex::build_dense(const DenseEmbedder & embedder) {
    Matrix m(passages.size(), embedder.dim());
    for (size_t i = 0; i < passages.size(); ++i) {
        auto v = embedder.embed(passages[i].text);
        std::copy(v.begin(), v.end(), m.row(i));
    }
    dense_vectors = std::move(m);
}

void PassageIndex::save(const std::string & path_prefix) const {
    std::string out;
    for (const auto & p : passages) {
        nlohmann::ordered_json j;
        j["pid"] = p.pid;
        j["doc_id"] = p.doc_id;
        j["text"] = p.text;
        j["char_start"] = p.char_start;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path_prefix + ".passages.jsonl", out);
    if (dense_vectors) {
        emb1_save(*dense_vectors, path_prefix + ".emb");
    }
}

PassageIndex PassageIndex::load(const std::string & path_prefix) {
    std::vector<Passage> passages;
    for (const auto & line : split_lines(read_file(path_prefix + ".passages.jsonl"))) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        Passage p;
        p.pid = j.at("pid").get<std::string>();
        p.doc_id = j.at("doc_id").get<std::string>();
        p.text = j.at("text").get<std::string>();
        p.char_start = j.at("char_start").get<size_t>();
        passages.push_back(std::move(p));
    }
    PassageIndex idx = build(std::move(passages));
    std::ifstream probe(path_prefix + ".emb");
    if (probe.good()) {
        idx.dense_vectors = emb1_load(path_prefix + ".emb");
    }
    return idx;
}

// --- scoring ---

static constexpr double kBm25K1 = 1.2;
static constexpr double kBm25B = 0.75;

static double bm25_score_at(const PassageIndex & index, const std::vector<std::string> & qterms,
                            size_t i) {
    const double n = static_cast<double>(index.size());
    const double len = static_cast<double>(index.doc_lens[i]);
    double score = 0.0;
    for (const auto & t : qterms) {
        auto tf_it = index.term_freqs[i].find(t);
        if (tf_it == index.term_freqs[i].end()) continue;
        auto df_it = index.doc_freqs.find(t);
        const double df = df_it == index.doc_freqs.end() ? 0.0 : df_it->second;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double tf = tf_it->second;
        const double denom = tf + kBm25K1 * (1.0 - kBm25B + kBm25B * len / index.avg_doc_len);
        score += idf * tf * (kBm25K1 + 1.0) / denom;
    }
    return score;
}

double bm25_score(const PassageIndex & index, std::string_view query, const std::string & pid) {
    size_t i = index.index_of(pid);
    return bm25_score_at(index, text_terms(query), i);
}

std::vector<std::pair<std::string, double>> retrieve(const PassageIndex & index,
                                                     std::string_view query, size_t k,
                                                     const Scorer & scorer) {
    if (index.size() == 0) {
        throw Error("EmptyIndex", "cannot retrieve from an empty index");
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(index.size());
    if (scorer.kind == Scorer::Kind::BM25) {
        auto qterms = text_terms(query);
        for (size_t i = 0; i < index.size(); ++i) {
            scored.emplace_back(index.passages[i].pid, bm25_score_at(index, qterms, i));
        }
    } else {
        if (!scorer.embedder) {
            throw Error("BadScorer", "dense scorer needs an embedder");
        }
        if (!index.dense_vectors) {
            throw Error("DenseMissing", "index has no dense vectors; build_dense first");
        }
        auto q = scorer.embedder->embed(query);
        for (size_t i = 0; i < index.size(); ++i) {
            const double * row = index.dense_vectors->row(i);
            double dot = 0.0;
            for (size_t c = 0; c < q.size(); ++c) {
                dot += q[c] * row[c];
            }
            scored.emplace_back(index.passages[i].pid, dot);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto & a, const auto & b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) {
        scored.resize(k);
    }
    return scored;
}

// --- sample generation ---

static std::string fill_slot(std::string tmpl, const std::string & slot, const std::string & value) {
    size_t pos = tmpl.find(slot);
    while (pos != std::string::npos) {
        tmpl.replace(pos, slot.size(), value);
        pos = tmpl.find(slot, pos + value.size());
    }
    return tmpl;
}

std::vector<RetrievalSample> generate_samples(const PassageIndex & index, size_t n_samples,
                                              const gen::GenerationClient & qgen,
                                              const gen::GenerationClient & judge,
                                              const Scorer & baseline, const SampleGenOptions & opt,
                                              uint64_t rng_seed,
                                              std::vector<std::string> * disagreements) {
    if (index.size() <= opt.n_neg) {
        throw Error("InsufficientCorpus",
                    "need more than " + std::to_string(opt.n_neg) + " passages, have " +
                    std::to_string(index.size()));
    }
    std::mt19937_64 rng(rng_seed);
    std::vector<RetrievalSample> samples;
    samples.reserve(n_samples);
    for (size_t s = 0; s < n_samples; ++s) {
        const Passage & seed = index.passages[next_index(rng, index.size())];

        std::string query;
        try {
            query = qgen.generate({fill_slot(opt.qgen_prompt, "{passage}", seed.text)}).text;
        } catch (const Error & e) {
            throw Error("GenerationFailed",
                        "query generation failed at sample " + std::to_string(s) + ": " + e.what());
        }

        auto candidates = retrieve(index, query, opt.n_fetch, baseline);

        RetrievalSample sample;
        sample.query = query;
        sample.positives.push_back(seed.pid);
        std::unordered_set<std::string> positive_set{seed.pid};

        for (const auto & [pid, score] : candidates) {
            std::string judge_prompt =
                fill_slot(fill_slot(opt.judge_prompt, "{query}", query), "{passage}",
                          index.passages[index.index_of(pid)].text);
            std::string verdict;
            try {
                verdict = judge.generate({judge_prompt}).text;
            } catch (const Error & e) {
                throw Error("GenerationFailed",
                            "judging failed at sample " + std::to_string(s) + ": " + e.what());
            }
            if (verdict != "POS" && verdict != "NEG") {
                throw Error("GenerationFailed", "judge must answer exactly POS or NEG, got \"" +
                            verdict + "\" at sample " + std::to_string(s));
            }
            if (pid == seed.pid) {
                if (verdict == "NEG" && disagreements) {
                    disagreements->push_back("sample " + std::to_string(s) +
                                             ": judge rejected seed passage " + pid +
                                             "; kept as positive");
                }
                continue;   // seed already positive
            }
            if (verdict == "POS") {
                if (positive_set.insert(pid).second) {
                    sample.positives.push_back(pid);
                }
            } else if (sample.hard_negatives.size() < opt.n_neg) {
                sample.hard_negatives.push_back(pid);
            }
        }

        size_t need = opt.n_neg - sample.hard_negatives.size();
        if (need > 0) {
            std::unordered_set<std::string> taken(sample.hard_negatives.begin(),
                                                  sample.hard_negatives.end());
            std::vector<std::string> pool;
            pool.reserve(index.size());
            for (const auto & p : index.passages) {
                if (!positive_set.count(p.pid) && !taken.count(p.pid)) {
                    pool.push_back(p.pid);
                }
            }
            if (pool.size() < need) {
                throw Error("InsufficientCorpus",
                            "not enough non-positive passages to fill negatives at sample " +
                            std::to_string(s));
            }
            for (size_t i = 0; i < need; ++i) {
                size_t j = next_index(rng, pool.size());
                sample.filler_negatives.push_back(pool[j]);
                pool[j] = pool.back();
                pool.pop_back();
            }
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::string samples_to_jsonl(const std::vector<RetrievalSample> & samples) {
    std::string out;
    for (const auto & s : samples) {
        nlohmann::ordered_json j;
        j["query"] = s.query;
        j["positives"] = s.positives;
        j["hard_negatives"] = s.hard_negatives;
        j["filler_negatives"] = s.filler_negatives;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<RetrievalSample> samples_from_jsonl(const std::string & jsonl_text) {
    std::vector<RetrievalSample> samples;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        RetrievalSample s;
        s.query = j.at("query").get<std::string>();
        s.positives = j.at("positives").get<std::vector<std::string>>();
        s.hard_negatives = j.at("hard_negatives").get<std::vector<std::string>>();
        s.filler_negatives = j.at("filler_negatives").get<std::vector<std::string>>();
        samples.push_back(std::move(s));
    }
    return samples;
}

// --- contrastive loss ---

LossResult contrastive_loss(const DenseEmbedder & embedder, const RetrievalSample & sample,
                            const PassageIndex & index) {
    std::vector<std::string> negatives = sample.hard_negatives;
    negatives.insert(negatives.end(), sample.filler_negatives.begin(),
                     sample.filler_negatives.end());
    if (sample.positives.empty() || negatives.empty()) {
        throw Error("DegenerateSample", "sample needs at least one positive and one negative");
    }
    const size_t d = embedder.dim();
    const double tau = embedder.temperature;

    struct Node {
        std::vector<std::pair<size_t, double>> feats;
        std::vector<double> u;        // pre-normalization
        std::vector<double> e;        // normalized
        double norm = 0.0;
        std::vector<double> grad_e;   // accumulated dL/de
    };
    auto make_node = [&](std::string_view text) {
        Node n;
        n.feats = embedder.features(text);
        n.u.assign(d, 0.0);
        for (const auto & [bucket, count] : n.feats) {
            const double * row = embedder.projection.row(bucket);
            for (size_t c = 0; c < d; ++c) {
                n.u[c] += count * row[c];
            }
        }
        double norm2 = 0.0;
        for (double v : n.u) norm2 += v * v;
        n.norm = std::sqrt(norm2);
        n.e = n.u;
        if (n.norm > 0.0) {
            for (double & v : n.e) v /= n.norm;
        }
        n.grad_e.assign(d, 0.0);
        return n;
    };

    Node qnode = make_node(sample.query);
    std::vector<Node> pos_nodes, neg_nodes;
    for (const auto & pid : sample.positives) {
        pos_nodes.push_back(make_node(index.passages[index.index_of(pid)].text));
    }
    for (const auto & pid : negatives) {
        neg_nodes.push_back(make_node(index.passages[index.index_of(pid)].text));
    }

    auto dot = [&](const std::vector<double> & a, const std::vector<double> & b) {
        double s = 0.0;
        for (size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
        return s;
    };

    std::vector<double> neg_logits(neg_nodes.size());
    for (size_t i = 0; i < neg_nodes.size(); ++i) {
        neg_logits[i] = dot(qnode.e, neg_nodes[i].e) / tau;
    }

    const double inv_p = 1.0 / static_cast<double>(pos_nodes.size());
    double total_loss = 0.0;
    for (size_t p = 0; p < pos_nodes.size(); ++p) {
        const double pos_logit = dot(qnode.e, pos_nodes[p].e) / tau;
        double mx = pos_logit;
        for (double l : neg_logits) mx = std::max(mx, l);
        double z = std::exp(pos_logit - mx);
        const double exp_pos = z;
        for (double l : neg_logits) z += std::exp(l - mx);
        total_loss += -(pos_logit - mx) + std::log(z);

        // softmax weights over {p} u negatives
        const double sigma_pos = exp_pos / z;
        // dL_p/de_q and per-candidate de
        for (size_t c = 0; c < d; ++c) {
            qnode.grad_e[c] += inv_p * (sigma_pos - 1.0) / tau * pos_nodes[p].e[c];
        }
        for (size_t c = 0; c < d; ++c) {
            pos_nodes[p].grad_e[c] += inv_p * (sigma_pos - 1.0) / tau * qnode.e[c];
        }
        for (size_t i = 0; i < neg_nodes.size(); ++i) {
            const double sigma_neg = std::exp(neg_logits[i] - mx) / z;
            for (size_t c = 0; c < d; ++c) {
                qnode.grad_e[c] += inv_p * sigma_neg / tau * neg_nodes[i].e[c];
                neg_nodes[i].grad_e[c] += inv_p * sigma_neg / tau * qnode.e[c];
            }
        }
    }

    LossResult res;
    res.loss = total_loss * inv_p;
    res.gradient = Matrix(embedder.buckets(), d);

    auto backprop = [&](const Node & n) {
        if (n.norm == 0.0) {
            return;   // zero embedding: no gradient flows
        }
        // du = (de - (de . e) e) / ||u||
        double proj = dot(n.grad_e, n.e);
        std::vector<double> du(d);
        for (size_t c = 0; c < d; ++c) {
            du[c] = (n.grad_e[c] - proj * n.e[c]) / n.norm;
        }
        for (const auto & [bucket, count] : n.feats) {
            double * row = res.gradient.row(bucket);
            for (size_t c = 0; c < d; ++c) {
                row[c] += count * du[c];
            }
        }
    };
    backprop(qnode);
    for (const auto & n : pos_nodes) backprop(n);
    for (const auto & n : neg_nodes) backprop(n);
    return res;
}

TrainResult train_embedder(DenseEmbedder init, const std::vector<RetrievalSample> & samples,
                           const PassageIndex & index, size_t epochs, double learning_rate,
                           uint64_t rng_seed) {
    if (samples.empty()) {
        throw Error("EmptySamples", "training needs at least one sample");
    }
    TrainResult res;
    res.embedder = std::move(init);
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<size_t> order(samples.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_seeded(order, rng_seed + 0x9e3779b97f4a7c15ULL * (epoch + 1));
        double loss_sum = 0.0;
        for (size_t i : order) {
            auto lr = contrastive_loss(res.embedder, samples[i], index);
            loss_sum += lr.loss;
            double * p = res.embedder.projection.data.data();
            const double * g = lr.gradient.data.data();
            const size_t n = res.embedder.projection.data.size();
            for (size_t j = 0; j < n; ++j) {
                p[j] -= learning_rate * g[j];
            }
        }
        res.epoch_losses.push_back(loss_sum / static_cast<double>(samples.size()));
    }
    return res;
}

// --- hit rate ---

const char * to_string(QueryCategory c) {
    switch (c) {
        case QueryCategory::Specs:     return "Specs";
        case QueryCategory::Testbench: return "Testbench";
        case QueryCategory::Build:     return "Build";
    }
    return "Specs";
}

QueryCategory query_category_from_string(const std::string & s) {
    for (QueryCategory c : {QueryCategory::Specs, QueryCategory::Testbench, QueryCategory::Build}) {
        if (s == to_string(c)) return c;
    }
    throw Error("BadCategory", "unknown query category \"" + s + "\"");
}

std::string eval_queries_to_jsonl(const std::vector<EvalQuery> & queries) {
    std::string out;
    for (const auto & q : queries) {
        nlohmann::ordered_json j;
        j["query"] = q.query;
        j["golden_pids"] = q.golden_pids;
        j["category"] = to_string(q.category);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<EvalQuery> eval_queries_from_jsonl(const std::string & jsonl_text) {
    std::vector<EvalQuery> queries;
    for (const auto & line : split_lines(jsonl_text)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        EvalQuery q;
        q.query = j.at("query").get<std::string>();
        q.golden_pids = j.at("golden_pids").get<std::vector<std::string>>();
        q.category = query_category_from_string(j.at("category").get<std::string>());
        if (q.golden_pids.empty()) {
            throw Error("BadBenchmark", "golden_pids must be nonempty");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

HitRateReport hit_rate(const PassageIndex & index, const std::vector<EvalQuery> & queries,
                       size_t k, const Scorer & scorer) {
    if (queries.empty()) {
        throw Error("EmptyQuerySet", "hit_rate needs at least one query");
    }
    std::map<std::string, std::pair<size_t, size_t>> per_cat;   // {hits, total}
    size_t hits = 0;
    for (const auto & q : queries) {
        for (const auto & pid : q.golden_pids) {
            if (!index.pid_to_idx.count(pid)) {
                throw Error("UnknownGoldenPid", "golden pid not in index: " + pid);
            }
        }
        auto top = retrieve(index, q.query, k, scorer);
        bool hit = false;
        for (const auto & [pid, score] : top) {
            for (const auto & g : q.golden_pids) {
                if (pid == g) { hit = true; break; }
            }
            if (hit) break;
        }
        auto & [ch, ct] = per_cat[to_string(q.category)];
        ct += 1;
        if (hit) {
            ch += 1;
            hits += 1;
        }
    }
    HitRateReport rep;
    for (const auto & [cat, counts] : per_cat) {
        rep.per_category[cat] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    rep.overall = static_cast<double>(hits) / static_cast<double>(queries.size());
    return rep;
}

} // namespace dakit::retrieval
