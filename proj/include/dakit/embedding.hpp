#pragma once

#include "dakit/matrix.hpp"
#include "dakit/tokenizer.hpp"

#include <utility>

namespace dakit::tok {

// Input embedding matrix plus output-projection matrix, both V x d and keyed
// to a tokenizer vocabulary.
struct EmbeddingBundle {
    Matrix input_embeddings;
    Matrix output_weights;

    size_t vocab_size() const { return input_embeddings.rows; }
    size_t dim() const { return input_embeddings.cols; }

    // Both matrices V x d, all entries finite.
    void validate() const;
};

// Expands the general tokenizer with the report's admitted tokens (appended
// as atomic added tokens, ids after the existing ones, in admitted order) and
// grows the bundle to match: each new token's input row is the arithmetic
// mean of the input rows of its encoding under the *original* general
// tokenizer, its output row is all zeros. Rows 0..V-1 are copied bitwise.
std::pair<TokenizerModel, EmbeddingBundle> augment(const TokenizerModel & general_tok,
                                                   const EmbeddingBundle & bundle,
                                                   const TokenDiffReport & report);

} // namespace dakit::tok
