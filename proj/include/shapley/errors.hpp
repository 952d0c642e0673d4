#pragma once

#include <stdexcept>
#include <string>

namespace shapley {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotSymmetric : Error {
    using Error::Error;
};

struct NotPositiveDefinite : Error {
    using Error::Error;
};

struct DimensionTooLarge : Error {
    using Error::Error;
};

struct ZeroVarianceModel : Error {
    using Error::Error;
};

struct ZeroGradient : Error {
    using Error::Error;
};

struct NonFiniteEvaluation : Error {
    using Error::Error;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct TooFewSamples : Error {
    using Error::Error;
};

struct DegenerateCoordinates : Error {
    using Error::Error;
};

// Bad experiment configuration (unknown keys, missing fields, invalid values).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace shapley
