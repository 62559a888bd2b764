#include "dakit/matrix.hpp"
#include "dakit/error.hpp"
#include "dakit/util.hpp"

#include <cmath>

namespace dakit {

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string emb1_write(const Matrix & m) {
    std::string out = "EMB1 " + std::to_string(m.rows) + " " + std::to_string(m.cols) + "\n";
    for (size_t r = 0; r < m.rows; ++r) {
        const double * p = m.row(r);
        for (size_t c = 0; c < m.cols; ++c) {
            if (c) out.push_back(' ');
            out += format_double(p[c]);
        }
        out.push_back('\n');
    }
    return out;
}

Matrix emb1_read(const std::string & text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0].rfind("EMB1 ", 0) != 0) {
        throw Error("BadFormat", "missing EMB1 header");
    }
    size_t rows = 0, cols = 0;
    {
        std::string rest = lines[0].substr(5);
        size_t sp = rest.find(' ');
        if (sp == std::string::npos) {
            throw Error("BadFormat", "EMB1 header needs <rows> <cols>");
        }
        rows = std::stoull(rest.substr(0, sp));
        cols = std::stoull(rest.substr(sp + 1));
    }
    if (lines.size() < rows + 1) {
        throw Error("BadFormat", "EMB1 body has fewer rows than header claims");
    }
    Matrix m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        const std::string & line = lines[r + 1];
        size_t pos = 0;
        for (size_t c = 0; c < cols; ++c) {
            size_t sp = line.find(' ', pos);
            std::string_view field(line.data() + pos, (sp == std::string::npos ? line.size() : sp) - pos);
            m.at(r, c) = parse_double(field);
            if (sp == std::string::npos && c + 1 < cols) {
                throw Error("BadFormat", "EMB1 row " + std::to_string(r) + " has too few columns");
            }
            pos = sp + 1;
        }
    }
    return m;
}

void emb1_save(const Matrix & m, const std::string & path) {
    write_file(path, emb1_write(m));
}

Matrix emb1_load(const std::string & path) {
    return emb1_read(read_file(path));
}

} // namespace dakit
