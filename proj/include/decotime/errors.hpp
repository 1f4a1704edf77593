#pragma once

#include <stdexcept>
#include <string>

namespace decotime {

struct Error : std::runtime_error {
	using std::runtime_error::runtime_error;
};

// State construction lost too much norm to the truncated basis, or a
// thermal tail exceeds its mass budget.
struct TruncationError : Error {
	using Error::Error;
};

struct DimensionMismatch : Error {
	using Error::Error;
};

// A closed form was requested outside its derivation domain.
struct ValidityError : Error {
	using Error::Error;
};

struct ConvergenceError : Error {
	using Error::Error;
};

struct QuadratureError : Error {
	using Error::Error;
};

// g(omega) * gamma^2(omega) vanishes, so no finite rate exists.
struct DegenerateModel : Error {
	using Error::Error;
};

struct EnsembleExplosion : Error {
	using Error::Error;
};

struct ConfigError : Error {
	using Error::Error;
};

} // namespace decotime
