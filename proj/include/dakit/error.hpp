#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dakit {

// Domain error with a stable machine-readable code (e.g. "EmptyCorpus").
// The CLI maps these to exit code 1 and prints {code, message}.
struct Error : std::runtime_error {
    std::string code;

    Error(std::string code_, const std::string & msg)
        : std::runtime_error(code_ + ": " + msg), code(std::move(code_)) {}
};

} // namespace dakit
