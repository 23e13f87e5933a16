#ifndef DIFFBAL_ERRORS_HPP
#define DIFFBAL_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diffbal {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad dimensions, misaligned grids, unreadable files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// A map returned a non-finite value, or an expression hit a domain violation.
/// `index` is the offending output coordinate (or source position for
/// expression evaluation).
class EvalError : public Error {
public:
    EvalError(const std::string& msg, std::ptrdiff_t index)
        : Error(msg), index(index) {}
    std::ptrdiff_t index;
};

/// Integration produced an overflowing or non-finite state.
/// `step` is the first grid index whose state is bad.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, std::ptrdiff_t step)
        : Error(msg), step(step) {}
    std::ptrdiff_t step;
};

/// Gramian validity failure: PSD violation beyond tolerance, or a missing
/// symmetry certificate on the dual path.
class GramianError : public Error {
public:
    explicit GramianError(const std::string& msg) : Error(msg) {}
};

/// Requested truncation order exceeds the effective rank of the transform.
class RankError : public Error {
public:
    explicit RankError(const std::string& msg) : Error(msg) {}
};

/// Expression text does not conform to the grammar. `offset` is the byte
/// position of the first offending character.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : Error(msg), offset(offset) {}
    std::size_t offset;
};

} // namespace diffbal

#endif // DIFFBAL_ERRORS_HPP
