#include "dakit/cli.hpp"

#include "dakit/align.hpp"
#include "dakit/blend.hpp"
#include "dakit/corpus.hpp"
#include "dakit/embedding.hpp"
#include "dakit/error.hpp"
#include "dakit/evalharness.hpp"
#include "dakit/genclient.hpp"
#include "dakit/matrix.hpp"
#include "dakit/retrieval.hpp"
#include "dakit/summarize.hpp"
#include "dakit/tokenizer.hpp"
#include "dakit/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <memory>
#include <set>

namespace dakit::cli {

namespace {

// every key a config file may set, across all subcommands
const std::set<std::string> & known_config_keys() {
    static const std::set<std::string> keys = {
        "root", "policy", "out", "counts", "multipliers", "steps", "tokens_per_step",
        "corpus", "merges", "domain", "general", "sample", "tau", "max_new",
        "input_emb", "output_emb", "report", "orig", "aug",
        "chunk_size", "overlap", "k", "n", "n_fetch", "n_neg", "tau_c", "dim", "buckets",
        "index", "query", "scorer", "embedder", "samples", "epochs", "lr", "init", "queries",
        "seed", "tokenizer", "bugs", "task", "budget", "max_rounds", "safety_factor",
        "bug_id", "rules", "endpoint", "auth_env", "timeout_ms",
        "qgen_rules", "judge_rules", "qgen_endpoint", "judge_endpoint",
        "bench", "runs", "shots", "c",
    };
    return keys;
}

struct Ctx {
    std::string config_path;
    bool json = false;
    nlohmann::json config = nlohmann::json::object();

    void load() {
        if (config_path.empty()) return;
        config = nlohmann::json::parse(read_file(config_path));
        if (!config.is_object()) {
            throw Error("BadConfig", "config file must hold a JSON object");
        }
        for (const auto & [key, value] : config.items()) {
            if (!known_config_keys().count(key)) {
                throw Error("BadConfig", "unknown config key \"" + key + "\"");
            }
        }
    }

    // config value fills any option the command line left untouched
    template <typename T>
    void overlay(const CLI::App * cmd, const std::string & flag, T & value) const {
        if (cmd->count(flag) > 0) return;
        std::string key = flag.substr(flag.find_first_not_of('-'));
        std::replace(key.begin(), key.end(), '-', '_');
        if (config.contains(key)) {
            value = config[key].get<T>();
        }
    }
};

void require(const char * flag, const std::string & value) {
    if (value.empty()) {
        throw CLI::RequiredError(flag);
    }
}

void write_manifest(const std::string & out_path, const std::string & subcommand,
                    const nlohmann::ordered_json & params) {
    nlohmann::ordered_json m;
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["params"] = params;
    write_file(out_path + ".manifest.json", m.dump(2) + "\n");
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return buf;
}

std::unique_ptr<gen::GenerationClient> make_client(const std::string & rules_path,
                                                   const std::string & endpoint,
                                                   const std::string & auth_env, int timeout_ms,
                                                   const char * role) {
    if (!rules_path.empty() && !endpoint.empty()) {
        throw Error("BadClient", std::string(role) + ": give a rules file or an endpoint, not both");
    }
    if (!rules_path.empty()) {
        return std::make_unique<gen::RuleMock>(gen::RuleMock::from_json(read_file(rules_path)));
    }
    if (!endpoint.empty()) {
        return std::make_unique<gen::HttpClient>(endpoint, auth_env, timeout_ms);
    }
    throw Error("BadClient", std::string(role) + ": requires --rules FILE or --endpoint URL");
}

tok::TokenizerModel load_tokenizer_or_bytes(const std::string & prefix) {
    if (prefix.empty()) {
        return tok::TokenizerModel::byte_level();
    }
    return tok::TokenizerModel::load(prefix + ".vocab", prefix + ".merges");
}

std::map<corpus::Category, uint64_t> parse_count_map(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    std::map<corpus::Category, uint64_t> out;
    for (const auto & [key, value] : j.items()) {
        out[corpus::category_from_string(key)] = value.get<uint64_t>();
    }
    return out;
}

std::map<corpus::Category, double> parse_multiplier_map(const std::string & json_text) {
    auto j = nlohmann::json::parse(json_text);
    std::map<corpus::Category, double> out;
    for (const auto & [key, value] : j.items()) {
        out[corpus::category_from_string(key)] = value.get<double>();
    }
    return out;
}

retrieval::Scorer pick_scorer(const std::string & name, const retrieval::DenseEmbedder * embedder) {
    if (name == "bm25") {
        return retrieval::Scorer::bm25();
    }
    if (name == "dense") {
        if (!embedder) {
            throw Error("BadScorer", "dense scoring needs --embedder PREFIX");
        }
        return retrieval::Scorer::dense(*embedder);
    }
    throw Error("BadScorer", "scorer must be bm25 or dense, got \"" + name + "\"");
}

// ---- subcommand setup ----

void setup_ingest(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string root, policy, out;
        bool no_dedup = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("ingest", "collect documents under a root into JSONL records");
    cmd->add_option("--root", o->root, "corpus root directory");
    cmd->add_option("--policy", o->policy, "filter policy JSON file");
    cmd->add_option("--out", o->out, "output JSONL path");
    cmd->add_flag("--no-dedup", o->no_dedup, "keep duplicate-checksum documents");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--root", o->root);
        ctx.overlay(cmd, "--policy", o->policy);
        ctx.overlay(cmd, "--out", o->out);
        require("--root", o->root);
        require("--out", o->out);
        auto policy = o->policy.empty() ? corpus::FilterPolicy::defaults()
                                        : corpus::FilterPolicy::from_json(read_file(o->policy));
        std::vector<corpus::IngestWarning> warnings;
        auto records = corpus::ingest(o->root, policy, &warnings);
        for (const auto & w : warnings) {
            std::cerr << "warning: " << w.path << ": " << w.reason << "\n";
        }
        size_t before = records.size();
        if (!o->no_dedup) {
            records = corpus::dedup(records);
        }
        write_file(o->out, corpus::to_jsonl(records));
        write_manifest(o->out, "ingest",
                       {{"root", o->root},
                        {"policy", o->policy},
                        {"dedup", !o->no_dedup}});
        std::cout << "ingested " << before << " documents, kept " << records.size() << "\n";
    });
}

void setup_blend(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string counts, multipliers, out;
        uint64_t steps = 0, tokens_per_step = 0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("blend", "compute the training-blend manifest");
    cmd->add_option("--counts", o->counts, "JSON {category: data tokens}");
    cmd->add_option("--multipliers", o->multipliers, "JSON {category: multiplier}");
    cmd->add_option("--out", o->out, "output manifest JSON path");
    cmd->add_option("--steps", o->steps, "training steps, for epoch arithmetic");
    cmd->add_option("--tokens-per-step", o->tokens_per_step, "tokens per training step");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--counts", o->counts);
        ctx.overlay(cmd, "--multipliers", o->multipliers);
        ctx.overlay(cmd, "--out", o->out);
        ctx.overlay(cmd, "--steps", o->steps);
        ctx.overlay(cmd, "--tokens-per-step", o->tokens_per_step);
        require("--counts", o->counts);
        require("--multipliers", o->multipliers);
        auto manifest = blend::compute_blend(parse_count_map(read_file(o->counts)),
                                             parse_multiplier_map(read_file(o->multipliers)));
        if (!o->out.empty()) {
            write_file(o->out, manifest.to_json());
            write_manifest(o->out, "blend",
                           {{"counts", o->counts}, {"multipliers", o->multipliers}});
        }
        if (ctx.json) {
            std::cout << manifest.to_json();
        } else {
            std::cout << manifest.to_table();
            std::cout << "public training fraction: "
                      << fixed(blend::public_fraction(manifest), 4) << "\n";
            if (o->steps > 0 && o->tokens_per_step > 0) {
                std::cout << "epochs: "
                          << fixed(blend::epochs_from_budget(manifest.total_training_tokens,
                                                             o->tokens_per_step, o->steps), 4)
                          << "\n";
            }
        }
    });
}

void setup_tok_train(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string corpus, out;
        uint64_t merges = 1000;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("tok-train", "train a byte-level BPE tokenizer");
    cmd->add_option("--corpus", o->corpus, "document JSONL");
    cmd->add_option("--merges", o->merges, "merge budget");
    cmd->add_option("--out", o->out, "output prefix (.vocab/.merges)");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--corpus", o->corpus);
        ctx.overlay(cmd, "--merges", o->merges);
        ctx.overlay(cmd, "--out", o->out);
        require("--corpus", o->corpus);
        require("--out", o->out);
        auto records = corpus::from_jsonl(read_file(o->corpus));
        std::vector<std::string> texts;
        texts.reserve(records.size());
        for (auto & r : records) {
            texts.push_back(std::move(r.content));
        }
        auto model = tok::train_bpe(texts, o->merges);
        model.save(o->out + ".vocab", o->out + ".merges");
        write_manifest(o->out, "tok-train", {{"corpus", o->corpus}, {"merges", o->merges}});
        std::cout << "trained " << model.merges.size() << " merges, vocab "
                  << model.vocab_size() << "\n";
    });
}

void setup_tok_diff(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string domain, general, sample, out;
        double tau = 1.0;
        uint64_t max_new = 0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("tok-diff", "find domain tokens worth adding");
    cmd->add_option("--domain", o->domain, "domain tokenizer prefix");
    cmd->add_option("--general", o->general, "general tokenizer prefix");
    cmd->add_option("--sample", o->sample, "general-corpus sample text file");
    cmd->add_option("--tau", o->tau, "rarity threshold, occurrences per million chars");
    cmd->add_option("--max-new", o->max_new, "cap on admitted tokens (0 = no cap)");
    cmd->add_option("--out", o->out, "output report JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--domain", o->domain);
        ctx.overlay(cmd, "--general", o->general);
        ctx.overlay(cmd, "--sample", o->sample);
        ctx.overlay(cmd, "--tau", o->tau);
        ctx.overlay(cmd, "--max-new", o->max_new);
        ctx.overlay(cmd, "--out", o->out);
        require("--domain", o->domain);
        require("--general", o->general);
        require("--out", o->out);
        auto domain_tok = load_tokenizer_or_bytes(o->domain);
        auto general_tok = load_tokenizer_or_bytes(o->general);
        std::string sample = o->sample.empty() ? std::string() : read_file(o->sample);
        auto report = tok::diff_new_tokens(domain_tok, general_tok, sample, o->tau);
        if (o->max_new > 0 && report.admitted.size() > o->max_new) {
            report.admitted.resize(o->max_new);
        }
        write_file(o->out, report.to_json());
        write_manifest(o->out, "tok-diff",
                       {{"domain", o->domain},
                        {"general", o->general},
                        {"sample", o->sample},
                        {"tau", o->tau},
                        {"max_new", o->max_new}});
        std::cout << report.candidates.size() << " candidates, " << report.admitted.size()
                  << " admitted\n";
    });
}

void setup_tok_augment(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string general, input_emb, output_emb, report, out;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("tok-augment", "extend a tokenizer and its embeddings");
    cmd->add_option("--general", o->general, "general tokenizer prefix");
    cmd->add_option("--input-emb", o->input_emb, "input embedding EMB1 file");
    cmd->add_option("--output-emb", o->output_emb, "output-weight EMB1 file");
    cmd->add_option("--report", o->report, "token diff report JSON");
    cmd->add_option("--out", o->out, "output prefix (.vocab/.merges/.input.emb/.output.emb)");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--general", o->general);
        ctx.overlay(cmd, "--input-emb", o->input_emb);
        ctx.overlay(cmd, "--output-emb", o->output_emb);
        ctx.overlay(cmd, "--report", o->report);
        ctx.overlay(cmd, "--out", o->out);
        require("--general", o->general);
        require("--input-emb", o->input_emb);
        require("--output-emb", o->output_emb);
        require("--report", o->report);
        require("--out", o->out);
        auto general_tok = load_tokenizer_or_bytes(o->general);
        tok::EmbeddingBundle bundle{emb1_load(o->input_emb), emb1_load(o->output_emb)};
        auto report = tok::TokenDiffReport::from_json(read_file(o->report));
        auto [aug_tok, aug_bundle] = tok::augment(general_tok, bundle, report);
        aug_tok.save(o->out + ".vocab", o->out + ".merges");
        emb1_save(aug_bundle.input_embeddings, o->out + ".input.emb");
        emb1_save(aug_bundle.output_weights, o->out + ".output.emb");
        write_manifest(o->out, "tok-augment",
                       {{"general", o->general},
                        {"input_emb", o->input_emb},
                        {"output_emb", o->output_emb},
                        {"report", o->report}});
        std::cout << "vocab " << general_tok.vocab_size() << " -> " << aug_tok.vocab_size()
                  << "\n";
    });
}

void setup_tok_eval(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string orig, aug, corpus, out;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("tok-eval", "tokenization efficiency gain per category");
    cmd->add_option("--orig", o->orig, "original tokenizer prefix");
    cmd->add_option("--aug", o->aug, "augmented tokenizer prefix");
    cmd->add_option("--corpus", o->corpus, "document JSONL to measure on");
    cmd->add_option("--out", o->out, "optional report JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--orig", o->orig);
        ctx.overlay(cmd, "--aug", o->aug);
        ctx.overlay(cmd, "--corpus", o->corpus);
        ctx.overlay(cmd, "--out", o->out);
        require("--orig", o->orig);
        require("--aug", o->aug);
        require("--corpus", o->corpus);
        auto orig_tok = load_tokenizer_or_bytes(o->orig);
        auto aug_tok = load_tokenizer_or_bytes(o->aug);
        auto records = corpus::from_jsonl(read_file(o->corpus));
        std::vector<std::string> texts;
        std::vector<std::string> labels;
        for (auto & r : records) {
            labels.emplace_back(corpus::to_string(r.category));
            texts.push_back(std::move(r.content));
        }
        auto report = tok::efficiency_gain(orig_tok, aug_tok, texts, &labels);
        nlohmann::ordered_json j;
        for (const auto & [category, gain] : report.by_category) {
            j[category] = gain;
        }
        j["overall"] = report.overall;
        if (!o->out.empty()) {
            write_file(o->out, j.dump(2) + "\n");
            write_manifest(o->out, "tok-eval",
                           {{"orig", o->orig}, {"aug", o->aug}, {"corpus", o->corpus}});
        }
        if (ctx.json) {
            std::cout << j.dump(2) << "\n";
        } else {
            for (const auto & [category, gain] : report.by_category) {
                std::cout << category << ": " << fixed(gain * 100.0, 1) << "%\n";
            }
            std::cout << "overall: " << fixed(report.overall * 100.0, 1) << "%\n";
        }
    });
}

void setup_index(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string corpus, out, embedder;
        uint64_t chunk_size = 512, overlap = 0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("index", "chunk documents into a passage index");
    cmd->add_option("--corpus", o->corpus, "document JSONL");
    cmd->add_option("--chunk-size", o->chunk_size, "passage size in characters");
    cmd->add_option("--overlap", o->overlap, "window overlap in characters");
    cmd->add_option("--embedder", o->embedder, "dense embedder prefix; adds dense vectors");
    cmd->add_option("--out", o->out, "output index prefix");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--corpus", o->corpus);
        ctx.overlay(cmd, "--chunk-size", o->chunk_size);
        ctx.overlay(cmd, "--overlap", o->overlap);
        ctx.overlay(cmd, "--embedder", o->embedder);
        ctx.overlay(cmd, "--out", o->out);
        require("--corpus", o->corpus);
        require("--out", o->out);
        auto records = corpus::from_jsonl(read_file(o->corpus));
        std::vector<retrieval::Passage> passages;
        for (const auto & r : records) {
            auto chunks = retrieval::chunk(r, o->chunk_size, o->overlap);
            passages.insert(passages.end(), std::make_move_iterator(chunks.begin()),
                            std::make_move_iterator(chunks.end()));
        }
        auto index = retrieval::PassageIndex::build(std::move(passages));
        if (!o->embedder.empty()) {
            index.build_dense(retrieval::DenseEmbedder::load(o->embedder));
        }
        index.save(o->out);
        write_manifest(o->out, "index",
                       {{"corpus", o->corpus},
                        {"chunk_size", o->chunk_size},
                        {"overlap", o->overlap},
                        {"embedder", o->embedder}});
        std::cout << "indexed " << index.size() << " passages from " << records.size()
                  << " documents\n";
    });
}

void setup_retrieve(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string index, query, scorer = "bm25", embedder, out;
        uint64_t k = 8;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("retrieve", "query a passage index");
    cmd->add_option("--index", o->index, "index prefix");
    cmd->add_option("--query", o->query, "query text");
    cmd->add_option("--k", o->k, "passages to return");
    cmd->add_option("--scorer", o->scorer, "bm25 or dense");
    cmd->add_option("--embedder", o->embedder, "dense embedder prefix");
    cmd->add_option("--out", o->out, "optional output JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--index", o->index);
        ctx.overlay(cmd, "--query", o->query);
        ctx.overlay(cmd, "--k", o->k);
        ctx.overlay(cmd, "--scorer", o->scorer);
        ctx.overlay(cmd, "--embedder", o->embedder);
        ctx.overlay(cmd, "--out", o->out);
        require("--index", o->index);
        require("--query", o->query);
        auto index = retrieval::PassageIndex::load(o->index);
        std::optional<retrieval::DenseEmbedder> embedder;
        if (!o->embedder.empty()) {
            embedder = retrieval::DenseEmbedder::load(o->embedder);
        }
        auto hits = retrieval::retrieve(index, o->query, o->k,
                                        pick_scorer(o->scorer, embedder ? &*embedder : nullptr));
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto & [pid, score] : hits) {
            j.push_back({{"pid", pid}, {"score", score}});
        }
        if (!o->out.empty()) {
            write_file(o->out, j.dump(2) + "\n");
            write_manifest(o->out, "retrieve",
                           {{"index", o->index},
                            {"query", o->query},
                            {"k", o->k},
                            {"scorer", o->scorer}});
        }
        if (ctx.json) {
            std::cout << j.dump(2) << "\n";
        } else {
            for (const auto & [pid, score] : hits) {
                std::cout << pid << "\t" << format_double(score) << "\n";
            }
        }
    });
}

void setup_gen_samples(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string index, qgen_rules, judge_rules, qgen_endpoint, judge_endpoint;
        std::string auth_env, out;
        uint64_t n = 100, n_fetch = 10, n_neg = 7, seed = 0;
        int timeout_ms = 30000;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("gen-samples", "generate contrastive retrieval samples");
    cmd->add_option("--index", o->index, "index prefix");
    cmd->add_option("--n", o->n, "samples to generate");
    cmd->add_option("--n-fetch", o->n_fetch, "candidates fetched per query");
    cmd->add_option("--n-neg", o->n_neg, "negatives per sample");
    cmd->add_option("--seed", o->seed, "rng seed");
    cmd->add_option("--qgen-rules", o->qgen_rules, "query-writer mock rules JSON");
    cmd->add_option("--judge-rules", o->judge_rules, "judge mock rules JSON");
    cmd->add_option("--qgen-endpoint", o->qgen_endpoint, "query-writer HTTP endpoint");
    cmd->add_option("--judge-endpoint", o->judge_endpoint, "judge HTTP endpoint");
    cmd->add_option("--auth-env", o->auth_env, "env var holding the bearer token");
    cmd->add_option("--timeout-ms", o->timeout_ms, "HTTP timeout");
    cmd->add_option("--out", o->out, "output samples JSONL path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--index", o->index);
        ctx.overlay(cmd, "--n", o->n);
        ctx.overlay(cmd, "--n-fetch", o->n_fetch);
        ctx.overlay(cmd, "--n-neg", o->n_neg);
        ctx.overlay(cmd, "--seed", o->seed);
        ctx.overlay(cmd, "--qgen-rules", o->qgen_rules);
        ctx.overlay(cmd, "--judge-rules", o->judge_rules);
        ctx.overlay(cmd, "--qgen-endpoint", o->qgen_endpoint);
        ctx.overlay(cmd, "--judge-endpoint", o->judge_endpoint);
        ctx.overlay(cmd, "--auth-env", o->auth_env);
        ctx.overlay(cmd, "--out", o->out);
        require("--index", o->index);
        require("--out", o->out);
        auto index = retrieval::PassageIndex::load(o->index);
        auto qgen = make_client(o->qgen_rules, o->qgen_endpoint, o->auth_env, o->timeout_ms,
                                "qgen");
        auto judge = make_client(o->judge_rules, o->judge_endpoint, o->auth_env, o->timeout_ms,
                                 "judge");
        retrieval::SampleGenOptions opt;
        opt.n_fetch = o->n_fetch;
        opt.n_neg = o->n_neg;
        std::vector<std::string> disagreements;
        auto samples = retrieval::generate_samples(index, o->n, *qgen, *judge,
                                                   retrieval::Scorer::bm25(), opt, o->seed,
                                                   &disagreements);
        for (const auto & d : disagreements) {
            std::cerr << "disagreement: " << d << "\n";
        }
        write_file(o->out, retrieval::samples_to_jsonl(samples));
        write_manifest(o->out, "gen-samples",
                       {{"index", o->index},
                        {"n", o->n},
                        {"n_fetch", o->n_fetch},
                        {"n_neg", o->n_neg},
                        {"seed", o->seed}});
        std::cout << "wrote " << samples.size() << " samples\n";
    });
}

void setup_ret_train(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string index, samples, init, out;
        uint64_t epochs = 10, seed = 0, buckets = 1u << 15, dim = 64;
        double lr = 0.1, tau_c = 0.05;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("ret-train", "contrastively train the dense embedder");
    cmd->add_option("--index", o->index, "index prefix");
    cmd->add_option("--samples", o->samples, "training samples JSONL");
    cmd->add_option("--epochs", o->epochs, "training epochs");
    cmd->add_option("--lr", o->lr, "SGD learning rate");
    cmd->add_option("--seed", o->seed, "shuffle seed (also embedder init seed)");
    cmd->add_option("--buckets", o->buckets, "hash buckets for a fresh embedder");
    cmd->add_option("--dim", o->dim, "embedding dimension for a fresh embedder");
    cmd->add_option("--tau-c", o->tau_c, "contrastive temperature for a fresh embedder");
    cmd->add_option("--init", o->init, "start from this embedder prefix instead");
    cmd->add_option("--out", o->out, "output embedder prefix");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--index", o->index);
        ctx.overlay(cmd, "--samples", o->samples);
        ctx.overlay(cmd, "--epochs", o->epochs);
        ctx.overlay(cmd, "--lr", o->lr);
        ctx.overlay(cmd, "--seed", o->seed);
        ctx.overlay(cmd, "--buckets", o->buckets);
        ctx.overlay(cmd, "--dim", o->dim);
        ctx.overlay(cmd, "--tau-c", o->tau_c);
        ctx.overlay(cmd, "--init", o->init);
        ctx.overlay(cmd, "--out", o->out);
        require("--index", o->index);
        require("--samples", o->samples);
        require("--out", o->out);
        auto index = retrieval::PassageIndex::load(o->index);
        auto samples = retrieval::samples_from_jsonl(read_file(o->samples));
        auto init = o->init.empty()
            ? retrieval::DenseEmbedder::random(o->buckets, o->dim, o->tau_c, o->seed)
            : retrieval::DenseEmbedder::load(o->init);
        auto result = retrieval::train_embedder(std::move(init), samples, index, o->epochs,
                                                o->lr, o->seed);
        result.embedder.save(o->out);
        write_manifest(o->out, "ret-train",
                       {{"index", o->index},
                        {"samples", o->samples},
                        {"epochs", o->epochs},
                        {"lr", o->lr},
                        {"seed", o->seed},
                        {"buckets", o->buckets},
                        {"dim", o->dim},
                        {"tau_c", o->tau_c},
                        {"init", o->init}});
        for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
            std::cout << "epoch " << e << ": loss " << fixed(result.epoch_losses[e], 6) << "\n";
        }
    });
}

void setup_ret_eval(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string index, queries, scorer = "bm25", embedder, out;
        uint64_t k = 8;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("ret-eval", "hit rate of a scorer on benchmark queries");
    cmd->add_option("--index", o->index, "index prefix");
    cmd->add_option("--queries", o->queries, "benchmark queries JSONL");
    cmd->add_option("--k", o->k, "top-k cutoff");
    cmd->add_option("--scorer", o->scorer, "bm25 or dense");
    cmd->add_option("--embedder", o->embedder, "dense embedder prefix");
    cmd->add_option("--out", o->out, "optional report JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--index", o->index);
        ctx.overlay(cmd, "--queries", o->queries);
        ctx.overlay(cmd, "--k", o->k);
        ctx.overlay(cmd, "--scorer", o->scorer);
        ctx.overlay(cmd, "--embedder", o->embedder);
        ctx.overlay(cmd, "--out", o->out);
        require("--index", o->index);
        require("--queries", o->queries);
        auto index = retrieval::PassageIndex::load(o->index);
        auto queries = retrieval::eval_queries_from_jsonl(read_file(o->queries));
        std::optional<retrieval::DenseEmbedder> embedder;
        if (!o->embedder.empty()) {
            embedder = retrieval::DenseEmbedder::load(o->embedder);
        }
        auto report = retrieval::hit_rate(index, queries, o->k,
                                          pick_scorer(o->scorer, embedder ? &*embedder : nullptr));
        nlohmann::ordered_json j;
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto & [category, rate] : report.per_category) {
            per[category] = rate;
        }
        j["per_category"] = std::move(per);
        j["overall"] = report.overall;
        if (!o->out.empty()) {
            write_file(o->out, j.dump(2) + "\n");
            write_manifest(o->out, "ret-eval",
                           {{"index", o->index},
                            {"queries", o->queries},
                            {"k", o->k},
                            {"scorer", o->scorer},
                            {"embedder", o->embedder}});
        }
        if (ctx.json) {
            std::cout << j.dump(2) << "\n";
        } else {
            for (const auto & [category, rate] : report.per_category) {
                std::cout << category << ": " << fixed(rate, 4) << "\n";
            }
            std::cout << "overall: " << fixed(report.overall, 4) << "\n";
        }
    });
}

void setup_align_prep(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string domain, general, tokenizer, out;
        uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("align-prep", "render, mask, and mix chat datasets");
    cmd->add_option("--domain", o->domain, "domain chat samples JSONL");
    cmd->add_option("--general", o->general, "general chat samples JSONL");
    cmd->add_option("--seed", o->seed, "shuffle seed");
    cmd->add_option("--tokenizer", o->tokenizer, "tokenizer prefix for loss masks (default: bytes)");
    cmd->add_option("--out", o->out, "output JSONL path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--domain", o->domain);
        ctx.overlay(cmd, "--general", o->general);
        ctx.overlay(cmd, "--seed", o->seed);
        ctx.overlay(cmd, "--tokenizer", o->tokenizer);
        ctx.overlay(cmd, "--out", o->out);
        require("--domain", o->domain);
        require("--general", o->general);
        require("--out", o->out);
        auto tokenizer = load_tokenizer_or_bytes(o->tokenizer);
        auto domain = align::samples_from_jsonl(read_file(o->domain));
        auto general = align::samples_from_jsonl(read_file(o->general));
        auto prep = [&](std::vector<align::ChatSample> & samples) {
            for (auto & s : samples) {
                s.rendered = align::render_chat(s.system, s.turns);
                s.loss_mask = align::loss_mask(s, tokenizer);
            }
        };
        prep(domain);
        prep(general);
        auto mixed = align::mix_datasets(std::move(domain), general, o->seed);
        write_file(o->out, align::samples_to_jsonl(mixed));
        write_manifest(o->out, "align-prep",
                       {{"domain", o->domain},
                        {"general", o->general},
                        {"seed", o->seed},
                        {"tokenizer", o->tokenizer}});
        std::cout << "mixed " << mixed.size() << " samples\n";
    });
}

void setup_bug_summarize(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string bugs, task = "technical", rules, endpoint, auth_env, tokenizer, bug_id, out;
        uint64_t budget = 2048, max_rounds = 8;
        double safety_factor = 0.9;
        int timeout_ms = 30000;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("bug-summarize", "hierarchical bug-report summarization");
    cmd->add_option("--bugs", o->bugs, "bug records JSONL");
    cmd->add_option("--bug-id", o->bug_id, "which bug to summarize (default: the only one)");
    cmd->add_option("--task", o->task, "technical, managerial, or assignment");
    cmd->add_option("--budget", o->budget, "prompt token budget");
    cmd->add_option("--max-rounds", o->max_rounds, "round limit");
    cmd->add_option("--safety-factor", o->safety_factor, "fraction of the budget actually used");
    cmd->add_option("--rules", o->rules, "mock rules JSON");
    cmd->add_option("--endpoint", o->endpoint, "HTTP endpoint");
    cmd->add_option("--auth-env", o->auth_env, "env var holding the bearer token");
    cmd->add_option("--timeout-ms", o->timeout_ms, "HTTP timeout");
    cmd->add_option("--tokenizer", o->tokenizer, "tokenizer prefix for budgeting (default: bytes)");
    cmd->add_option("--out", o->out, "output JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--bugs", o->bugs);
        ctx.overlay(cmd, "--bug-id", o->bug_id);
        ctx.overlay(cmd, "--task", o->task);
        ctx.overlay(cmd, "--budget", o->budget);
        ctx.overlay(cmd, "--max-rounds", o->max_rounds);
        ctx.overlay(cmd, "--safety-factor", o->safety_factor);
        ctx.overlay(cmd, "--rules", o->rules);
        ctx.overlay(cmd, "--endpoint", o->endpoint);
        ctx.overlay(cmd, "--auth-env", o->auth_env);
        ctx.overlay(cmd, "--tokenizer", o->tokenizer);
        ctx.overlay(cmd, "--out", o->out);
        require("--bugs", o->bugs);
        require("--out", o->out);
        auto bugs = summarize::bugs_from_jsonl(read_file(o->bugs));
        const summarize::BugRecord * bug = nullptr;
        if (!o->bug_id.empty()) {
            for (const auto & b : bugs) {
                if (b.bug_id == o->bug_id) {
                    bug = &b;
                    break;
                }
            }
            if (!bug) {
                throw Error("UnknownBug", "no bug with id \"" + o->bug_id + "\" in " + o->bugs);
            }
        } else if (bugs.size() == 1) {
            bug = &bugs.front();
        } else {
            throw Error("AmbiguousBug", o->bugs + " holds " + std::to_string(bugs.size()) +
                        " bugs; pick one with --bug-id");
        }
        auto client = make_client(o->rules, o->endpoint, o->auth_env, o->timeout_ms, "summarizer");
        auto task = summarize::SummaryTask::make(summarize::task_kind_from_string(o->task));
        auto tokenizer = load_tokenizer_or_bytes(o->tokenizer);
        summarize::SummarizeOptions options;
        options.max_rounds = o->max_rounds;
        options.safety_factor = o->safety_factor;
        auto result = summarize::hierarchical_summarize(*bug, *client, task, o->budget,
                                                        tokenizer, options);
        write_file(o->out, result.to_json());
        write_manifest(o->out, "bug-summarize",
                       {{"bugs", o->bugs},
                        {"bug_id", o->bug_id},
                        {"task", o->task},
                        {"budget", o->budget},
                        {"max_rounds", o->max_rounds},
                        {"safety_factor", o->safety_factor}});
        std::cout << result.final_text << "\n";
    });
}

void setup_mc_eval(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string bench, rules, endpoint, auth_env, out;
        uint64_t runs = 5, seed = 0, shots = 5;
        int timeout_ms = 30000;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("mc-eval", "seeded few-shot multiple-choice evaluation");
    cmd->add_option("--bench", o->bench, "benchmark questions JSONL");
    cmd->add_option("--runs", o->runs, "independent runs to average");
    cmd->add_option("--seed", o->seed, "seed base; run i uses seed+i");
    cmd->add_option("--shots", o->shots, "shots per question");
    cmd->add_option("--rules", o->rules, "mock rules JSON");
    cmd->add_option("--endpoint", o->endpoint, "HTTP endpoint");
    cmd->add_option("--auth-env", o->auth_env, "env var holding the bearer token");
    cmd->add_option("--timeout-ms", o->timeout_ms, "HTTP timeout");
    cmd->add_option("--out", o->out, "optional result JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--bench", o->bench);
        ctx.overlay(cmd, "--runs", o->runs);
        ctx.overlay(cmd, "--seed", o->seed);
        ctx.overlay(cmd, "--shots", o->shots);
        ctx.overlay(cmd, "--rules", o->rules);
        ctx.overlay(cmd, "--endpoint", o->endpoint);
        ctx.overlay(cmd, "--auth-env", o->auth_env);
        ctx.overlay(cmd, "--out", o->out);
        require("--bench", o->bench);
        auto bench = eval::questions_from_jsonl(read_file(o->bench));
        auto model = make_client(o->rules, o->endpoint, o->auth_env, o->timeout_ms, "model");
        auto result = eval::run_mc_eval(bench, *model, o->runs, o->seed, o->shots);
        if (!o->out.empty()) {
            write_file(o->out, result.to_json());
            write_manifest(o->out, "mc-eval",
                           {{"bench", o->bench},
                            {"runs", o->runs},
                            {"seed", o->seed},
                            {"shots", o->shots}});
        }
        if (ctx.json) {
            std::cout << result.to_json();
        } else {
            for (size_t i = 0; i < result.per_run_accuracy.size(); ++i) {
                std::cout << "run " << i << ": " << fixed(result.per_run_accuracy[i], 4) << "\n";
            }
            std::cout << "mean: " << fixed(result.mean, 4) << "\n";
        }
    });
}

void setup_pass_at_k(CLI::App & app, Ctx & ctx) {
    struct Opts {
        uint64_t n = 0, c = 0, k = 0;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("pass-at-k", "unbiased pass@k estimate");
    cmd->add_option("--n", o->n, "samples generated");
    cmd->add_option("--c", o->c, "samples passing");
    cmd->add_option("--k", o->k, "k");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--n", o->n);
        ctx.overlay(cmd, "--c", o->c);
        ctx.overlay(cmd, "--k", o->k);
        for (const char * flag : {"--n", "--c", "--k"}) {
            std::string key(flag + 2);
            if (cmd->count(flag) == 0 && !ctx.config.contains(key)) {
                throw CLI::RequiredError(flag);
            }
        }
        double p = eval::pass_at_k(o->n, o->c, o->k);
        if (ctx.json) {
            std::cout << "{\"pass_at_k\": " << fixed(p, 6) << "}\n";
        } else {
            std::cout << fixed(p, 6) << "\n";
        }
    });
}

void setup_score_scripts(CLI::App & app, Ctx & ctx) {
    struct Opts {
        std::string tasks, out;
        uint64_t k = 5;
    };
    auto o = std::make_shared<Opts>();
    CLI::App * cmd = app.add_subcommand("score-scripts", "mean pass@k over scripting tasks");
    cmd->add_option("tasks", o->tasks, "tasks JSONL {id, n, c}")->required();
    cmd->add_option("--k", o->k, "k");
    cmd->add_option("--out", o->out, "optional report JSON path");
    cmd->callback([o, &ctx, cmd] {
        ctx.load();
        ctx.overlay(cmd, "--k", o->k);
        ctx.overlay(cmd, "--out", o->out);
        auto tasks = eval::script_tasks_from_jsonl(read_file(o->tasks));
        auto score = eval::score_script_bench(tasks, o->k);
        nlohmann::ordered_json j;
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto & [id, p] : score.per_task) {
            per[id] = p;
        }
        j["per_task"] = std::move(per);
        j["mean"] = score.mean;
        if (!o->out.empty()) {
            write_file(o->out, j.dump(2) + "\n");
            write_manifest(o->out, "score-scripts", {{"tasks", o->tasks}, {"k", o->k}});
        }
        if (ctx.json) {
            std::cout << j.dump(2) << "\n";
        } else {
            for (const auto & [id, p] : score.per_task) {
                std::cout << id << ": " << fixed(p, 6) << "\n";
            }
            std::cout << "mean: " << fixed(score.mean, 6) << "\n";
        }
    });
}

} // namespace

int run(std::vector<std::string> args) {
    Ctx ctx;
    CLI::App app{"domain-adaptation data toolkit"};
    app.name("dakit");
    app.require_subcommand(1);
    app.add_option("--config", ctx.config_path, "JSON config file; flags override its values");
    app.add_flag("--json", ctx.json, "machine-readable output");

    setup_ingest(app, ctx);
    setup_blend(app, ctx);
    setup_tok_train(app, ctx);
    setup_tok_diff(app, ctx);
    setup_tok_augment(app, ctx);
    setup_tok_eval(app, ctx);
    setup_index(app, ctx);
    setup_retrieve(app, ctx);
    setup_gen_samples(app, ctx);
    setup_ret_train(app, ctx);
    setup_ret_eval(app, ctx);
    setup_align_prep(app, ctx);
    setup_bug_summarize(app, ctx);
    setup_mc_eval(app, ctx);
    setup_pass_at_k(app, ctx);
    setup_score_scripts(app, ctx);

    for (CLI::App * sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp &) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError & e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    } catch (const Error & e) {
        std::string message = e.what();
        if (message.rfind(e.code + ": ", 0) == 0) {
            message = message.substr(e.code.size() + 2);
        }
        nlohmann::ordered_json j;
        j["error"] = e.code;
        j["message"] = message;
        std::cerr << j.dump() << "\n";
        return 1;
    }
    return 0;
}

} // namespace dakit::cli
