#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnls {

/// Base of every error raised by the library. `what()` carries a
/// human-readable message; subclasses carry the structured payload.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A site density fell below the configured floor.
class DensityBelowFloor : public Error {
public:
    DensityBelowFloor(std::size_t site, double value, double floor)
        : Error("density " + std::to_string(value) + " below floor " + std::to_string(floor) +
                " at site " + std::to_string(site)),
          site_(site), value_(value), floor_(floor) {}

    std::size_t site() const noexcept { return site_; }
    double value() const noexcept { return value_; }
    double floor() const noexcept { return floor_; }

private:
    std::size_t site_;
    double value_;
    double floor_;
};

class NonpositiveDensity : public Error {
public:
    explicit NonpositiveDensity(std::size_t site)
        : Error("nonpositive density at site " + std::to_string(site)), site_(site) {}
    std::size_t site() const noexcept { return site_; }

private:
    std::size_t site_;
};

/// The wrapped phase winds by a nonzero multiple of 2π around a lattice loop.
class WindingDetected : public Error {
public:
    WindingDetected(std::size_t site, int winding)
        : Error("phase winding " + std::to_string(winding) + " detected at loop anchored on site " +
                std::to_string(site)),
          site_(site), winding_(winding) {}
    std::size_t site() const noexcept { return site_; }
    int winding() const noexcept { return winding_; }

private:
    std::size_t site_;
    int winding_;
};

class UnknownSlot : public Error {
public:
    using Error::Error;
};

/// Integrability failure: the generator gradient is not curl free.
class ConditionViolated : public Error {
public:
    ConditionViolated(double measured, double tolerance)
        : Error("integrability condition violated: path dependence " + std::to_string(measured) +
                " exceeds tolerance " + std::to_string(tolerance)),
          measured_(measured), tolerance_(tolerance) {}
    double measured() const noexcept { return measured_; }
    double tolerance() const noexcept { return tolerance_; }

private:
    double measured_;
    double tolerance_;
};

class InversionUnavailable : public Error {
public:
    using Error::Error;
};

class NonFiniteDetected : public Error {
public:
    NonFiniteDetected(long step, std::size_t site)
        : Error("non-finite value at step " + std::to_string(step) + ", site " + std::to_string(site)),
          step_(step), site_(site) {}
    long step() const noexcept { return step_; }
    std::size_t site() const noexcept { return site_; }

private:
    long step_;
    std::size_t site_;
};

class StabilityViolation : public Error {
public:
    using Error::Error;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

/// Malformed configuration text; `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A well-formed configuration value that breaks a constraint.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& constraint)
        : Error(field + ": " + constraint), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace gnls
