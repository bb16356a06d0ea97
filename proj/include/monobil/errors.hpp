#pragma once

#include <stdexcept>
#include <string>

namespace monobil {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

class UnstableClosedLoop : public Error {
public:
    explicit UnstableClosedLoop(double spectral_abscissa)
        : Error("closed loop is not Hurwitz (spectral abscissa " + std::to_string(spectral_abscissa) + ")"),
          spectral_abscissa_(spectral_abscissa) {}

    [[nodiscard]] double spectral_abscissa() const noexcept { return spectral_abscissa_; }

private:
    double spectral_abscissa_;
};

class OutsideStabilityRegion : public Error {
public:
    using Error::Error;
};

class InvalidWeights : public Error {
public:
    using Error::Error;
};

class DegenerateTopSingularValue : public Error {
public:
    using Error::Error;
};

class NoStabilizingInitialPoint : public Error {
public:
    using Error::Error;
};

class InvalidOptions : public Error {
public:
    using Error::Error;
};

class NonMonotoneInputMap : public Error {
public:
    using Error::Error;
};

class BoundViolation : public Error {
public:
    using Error::Error;
};

class StateBlowup : public Error {
public:
    explicit StateBlowup(double time)
        : Error("state magnitude exceeded blowup guard at t = " + std::to_string(time)), time_(time) {}

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace monobil
