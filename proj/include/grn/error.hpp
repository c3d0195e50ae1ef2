#pragma once

#include <stdexcept>
#include <string>

namespace grn {

enum class ErrorKind {
    Dimension,   // tensor/shape mismatch
    Parameter,   // bad argument value
    Length,      // signal too short
    Protocol,    // dataset/episode contract violated
    Taxonomy,    // unmapped candidate class
    Io,          // file open/read/write
    Checksum,    // payload checksum mismatch
    Version,     // file format version mismatch
    Truncated,   // payload shorter than manifest claims
    Divergence,  // training loss blew up
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) {
    throw Error(k, msg);
}

}  // namespace grn
