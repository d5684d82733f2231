#pragma once

#include <stdexcept>
#include <string>

namespace drcal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidProblem : public Error { public: using Error::Error; };
class NumericOverflow : public Error { public: using Error::Error; };
class DegenerateDenominator : public Error { public: using Error::Error; };
class NonPositiveRatio : public Error { public: using Error::Error; };
class PropensityUnderflow : public Error { public: using Error::Error; };
class LinearSolveError : public Error { public: using Error::Error; };
class UndefinedStatistic : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// Wraps a failure from one stage of a multi-stage fit.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace drcal
