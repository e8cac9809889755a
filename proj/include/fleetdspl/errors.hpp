#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fleet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model or scenario text (bad JSON, wrong value types).
class SyntaxError : public Error {
public:
    using Error::Error;
};

/// Well-formed model that breaks a structural rule. `element()` names the culprit.
class SemanticError : public Error {
public:
    SemanticError(std::string element, const std::string& what)
        : Error(what), element_(std::move(element)) {}
    const std::string& element() const noexcept { return element_; }

private:
    std::string element_;
};

class UnknownFeature : public Error {
public:
    explicit UnknownFeature(std::string feature)
        : Error("unknown feature '" + feature + "'"), feature_(std::move(feature)) {}
    const std::string& feature() const noexcept { return feature_; }

private:
    std::string feature_;
};

class ModelTooLarge : public Error {
public:
    ModelTooLarge(std::size_t features, std::size_t limit)
        : Error("model has " + std::to_string(features) + " features; exhaustive enumeration is limited to " +
                std::to_string(limit)) {}
};

class InvalidSelection : public Error {
public:
    using Error::Error;
};

class UnsatisfiedCapability : public Error {
public:
    UnsatisfiedCapability(std::string feature, std::vector<std::string> missing);
    const std::string& feature() const noexcept { return feature_; }
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::string feature_;
    std::vector<std::string> missing_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class InvalidFact : public Error {
public:
    using Error::Error;
};

class UnknownMode : public Error {
public:
    explicit UnknownMode(const std::string& mode) : Error("unknown mode '" + mode + "'") {}
};

class NoFeasibleConfiguration : public Error {
public:
    NoFeasibleConfiguration() : Error("no valid selection is derivable against the feasible devices") {}
};

/// Scenario document missing a key or holding an unusable value. `key()` names it.
class ScenarioError : public Error {
public:
    ScenarioError(std::string key, const std::string& what) : Error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class InitialSelectionInvalid : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Trace file line that is not a well-formed event.
class TraceFormatError : public Error {
public:
    using Error::Error;
};

} // namespace fleet
