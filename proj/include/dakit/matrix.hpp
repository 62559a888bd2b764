#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dakit {

// Dense row-major matrix of doubles. Small enough on purpose: everything in
// this toolkit fits comfortably in memory and needs no BLAS.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double & at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }

    double * row(size_t r) { return data.data() + r * cols; }
    const double * row(size_t r) const { return data.data() + r * cols; }

    bool all_finite() const;
};

// "EMB1 <rows> <cols>" header, then one line per row of space-separated
// decimals printed with shortest round-trip representation. Reading back
// reproduces every double bit-exactly.
std::string emb1_write(const Matrix & m);
Matrix emb1_read(const std::string & text);

void emb1_save(const Matrix & m, const std::string & path);
Matrix emb1_load(const std::string & path);

} // namespace dakit
