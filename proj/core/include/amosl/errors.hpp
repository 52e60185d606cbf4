#pragma once

#include <stdexcept>
#include <string>

namespace amosl {

/// Operand shapes incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed input data: bad numeric token, wrong magic, truncated file, ...
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument value (negative weight, probability outside [0,1], ...).
class ValueError : public std::invalid_argument {
public:
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

/// Internal solver failure (non-finite cost, iteration cap, singular KKT system).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// A gradient audit could not be carried out (e.g. non-deterministic probe).
class AuditError : public std::runtime_error {
public:
    explicit AuditError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace amosl
