#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lesionforge {

// Base error carrying a short machine-parsable category. The CLI prints
// failures as one line: "error: <category>: <detail>".
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& detail)
        : std::runtime_error(detail), category_(std::move(category)) {}
    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& d) : Error("config", d) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& d) : Error("shape", d) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& d) : Error("numeric", d) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& d) : Error("usage", d) {}
};

struct IoError : Error {
    explicit IoError(const std::string& d) : Error("io", d) {}
};

struct MissingInputError : Error {
    explicit MissingInputError(const std::string& path)
        : Error("missing inputs", path) {}
};

struct StratificationError : Error {
    explicit StratificationError(const std::string& d) : Error("stratification", d) {}
};

struct EmptyInputError : Error {
    explicit EmptyInputError(const std::string& d) : Error("empty input", d) {}
};

struct UndefinedMetricError : Error {
    explicit UndefinedMetricError(const std::string& d) : Error("undefined metric", d) {}
};

struct LeakageError : Error {
    explicit LeakageError(const std::string& d) : Error("leakage", d) {}
};

}  // namespace lesionforge
