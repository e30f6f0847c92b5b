#pragma once

#include <stdexcept>
#include <string>

namespace egolane {

/// Invalid configuration value. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
    using std::domain_error::domain_error;
};

/// Operation applied to an object in the wrong state (e.g. an inactive hypothesis).
class StateError : public std::logic_error {
    using std::logic_error::logic_error;
};

class PreconditionError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Feature vector does not match the schema a model was trained with.
class SchemaError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace egolane
