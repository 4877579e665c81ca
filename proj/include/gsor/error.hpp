#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gsor {

/// Non-fatal diagnostics collected by parsers and builders.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
    if (sink) sink->push_back(std::move(message));
}

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied data or parameters was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Structured parse failure carrying the 1-based input line.
class ParseError : public Error {
public:
    ParseError(const std::string& description, std::size_t line)
        : Error(description + " at line " + std::to_string(line)),
          description_(description), line_(line) {}

    const std::string& description() const noexcept { return description_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string description_;
    std::size_t line_;
};

/// Some connected component carries no labeled vertex, so ker(L) and ker(Λ)
/// intersect nontrivially and the regularization map is undefined.
class ObservabilityError : public Error {
public:
    explicit ObservabilityError(std::vector<std::size_t> components)
        : Error(make_message(components)), components_(std::move(components)) {}

    const std::vector<std::size_t>& components() const noexcept { return components_; }

private:
    static std::string make_message(const std::vector<std::size_t>& components) {
        std::string msg = "unobserved component";
        if (components.size() > 1) msg += "s";
        msg += ":";
        for (std::size_t c : components) msg += " " + std::to_string(c);
        return msg;
    }

    std::vector<std::size_t> components_;
};

/// The semidefinite program admits no feasible multipliers.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Dense mode refuses graphs above the configured vertex cap.
class GraphTooLarge : public Error {
public:
    using Error::Error;
};

}  // namespace gsor
