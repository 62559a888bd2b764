#include "dakit/embedding.hpp"
#include "dakit/error.hpp"

#include <cstring>

namespace dakit::tok {

void EmbeddingBundle::validate() const {
    if (input_embeddings.rows != output_weights.rows ||
        input_embeddings.cols != output_weights.cols) {
        throw Error("DimensionMismatch", "input and output matrices must both be V x d");
    }
    if (!input_embeddings.all_finite() || !output_weights.all_finite()) {
        throw Error("NonFinite", "embedding matrices must not contain NaN/Inf");
    }
}

std::pair<TokenizerModel, EmbeddingBundle> augment(const TokenizerModel & general_tok,
                                                   const EmbeddingBundle & bundle,
                                                   const TokenDiffReport & report) {
    bundle.validate();
    if (bundle.vocab_size() != general_tok.vocab_size()) {
        throw Error("DimensionMismatch",
                    "bundle has " + std::to_string(bundle.vocab_size()) + " rows but vocab has " +
                    std::to_string(general_tok.vocab_size()) + " tokens");
    }
    const size_t v = bundle.vocab_size();
    const size_t d = bundle.dim();

    TokenizerModel aug_tok = general_tok;
    std::vector<std::string> accepted;
    accepted.reserve(report.admitted.size());
    for (const auto & t : report.admitted) {
        if (aug_tok.has_token(t)) {
            continue;   // defends against reports built from a stale vocab
        }
        aug_tok.add_token(t);
        accepted.push_back(t);
    }

    EmbeddingBundle out;
    out.input_embeddings = Matrix(v + accepted.size(), d);
    out.output_weights = Matrix(v + accepted.size(), d);
    std::memcpy(out.input_embeddings.data.data(), bundle.input_embeddings.data.data(),
                v * d * sizeof(double));
    std::memcpy(out.output_weights.data.data(), bundle.output_weights.data.data(),
                v * d * sizeof(double));

    for (size_t n = 0; n < accepted.size(); ++n) {
        auto ids = general_tok.encode(accepted[n]);
        double * row = out.input_embeddings.row(v + n);
        for (int id : ids) {
            const double * src = bundle.input_embeddings.row(static_cast<size_t>(id));
            for (size_t c = 0; c < d; ++c) {
                row[c] += src[c];
            }
        }
        const double count = static_cast<double>(ids.size());
        for (size_t c = 0; c < d; ++c) {
            row[c] /= count;
        }
        // output rows stay exactly zero
    }
    return {std::move(aug_tok), std::move(out)};
}

} // namespace dakit::tok
