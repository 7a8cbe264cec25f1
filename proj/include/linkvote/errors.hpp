#pragma once

#include <stdexcept>
#include <string>

namespace linkvote {

/// Raised when a parameter or config value is out of its domain. `field()`
/// names the offending field as it appears in config documents.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class NotAdjacentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A theorem precondition does not hold for the given parameters.
class ConditionFailed : public std::domain_error {
public:
    ConditionFailed(std::string condition, const std::string& what, double bound = 0.0)
        : std::domain_error(condition + ": " + what), condition_(std::move(condition)), bound_(bound) {}

    const std::string& condition() const noexcept { return condition_; }
    double bound() const noexcept { return bound_; }

private:
    std::string condition_;
    double bound_;
};

class UnblamedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace linkvote
