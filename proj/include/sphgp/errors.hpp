#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sphgp {

/// Broad failure class, mapped one-to-one onto CLI exit codes.
enum class ErrorClass { usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    [[nodiscard]] ErrorClass error_class() const noexcept { return cls_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorClass::usage, "config: " + what) {}
};

class InvalidPoint : public Error {
public:
    explicit InvalidPoint(const std::string& what) : Error(ErrorClass::data, "invalid point: " + what) {}
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorClass::data, "invalid input: " + what) {}
};

/// CSV parse failure; carries the 1-based line number of the offending row.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorClass::data, "parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class TransformError : public Error {
public:
    TransformError(std::size_t row, const std::string& what)
        : Error(ErrorClass::data, "transform error at row " + std::to_string(row) + ": " + what), row_(row) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class DegenerateScale : public Error {
public:
    explicit DegenerateScale(const std::string& what) : Error(ErrorClass::data, "degenerate scale: " + what) {}
};

class DuplicateLocation : public Error {
public:
    DuplicateLocation(std::size_t a, std::size_t b)
        : Error(ErrorClass::data,
                "duplicate location: indices " + std::to_string(a) + " and " + std::to_string(b)),
          first_(a), second_(b) {}
    [[nodiscard]] std::size_t first() const noexcept { return first_; }
    [[nodiscard]] std::size_t second() const noexcept { return second_; }

private:
    std::size_t first_;
    std::size_t second_;
};

class PlacementError : public Error {
public:
    explicit PlacementError(const std::string& what) : Error(ErrorClass::data, "region placement: " + what) {}
};

class InvalidSmoothness : public Error {
public:
    explicit InvalidSmoothness(double nu)
        : Error(ErrorClass::numerical, "invalid smoothness nu = " + std::to_string(nu)) {}
};

class ParameterOverflow : public Error {
public:
    explicit ParameterOverflow(const std::string& what) : Error(ErrorClass::numerical, "parameter overflow: " + what) {}
};

/// Factorization or conditional-variance failure. `index` is the offending
/// position (ordering position for Vecchia terms), or npos when not applicable.
class NumericalSingularity : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    explicit NumericalSingularity(const std::string& what, std::size_t index = npos)
        : Error(ErrorClass::numerical,
                "numerical singularity" + (index == npos ? std::string() : " at index " + std::to_string(index)) +
                    ": " + what),
          index_(index) {}
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class SimulationInfeasible : public Error {
public:
    explicit SimulationInfeasible(const std::string& what) : Error(ErrorClass::numerical, "simulation: " + what) {}
};

}  // namespace sphgp
