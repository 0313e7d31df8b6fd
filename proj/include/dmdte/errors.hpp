#pragma once

#include <stdexcept>
#include <string>

namespace dmdte {

/// Failure category; the CLI maps each category to its exit code.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid parameters: ranks, spans, ratios, options.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed or unusable input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class RankDeficientError : public NumericalError {
public:
    RankDeficientError(const std::string& what, long numerical_rank)
        : NumericalError(what), numerical_rank_(numerical_rank) {}
    long numerical_rank() const noexcept { return numerical_rank_; }

private:
    long numerical_rank_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
    }
    return 1;
}

} // namespace dmdte
