#pragma once

#include <stdexcept>
#include <string>

namespace bico {

// Mismatched tensor/matrix shapes anywhere in the pipeline.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid argument values (bad counts, out-of-range labels, bad configs).
struct argument_error : std::runtime_error {
    explicit argument_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or failed numeric routines.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized containers; carries the byte offset of the problem.
struct format_error : std::runtime_error {
    format_error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    std::size_t byte_offset;
};

// Operation called outside its documented preconditions.
struct precondition_error : std::runtime_error {
    explicit precondition_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bico
