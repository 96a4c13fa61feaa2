#pragma once

#include <stdexcept>
#include <string>

namespace timbre {

/// Base class for all library errors. Subclasses carry the failure kind in
/// the type so callers can catch specific contract violations.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// dsp
struct InputTooShort : Error { using Error::Error; };
struct MissingPhase : Error { using Error::Error; };
struct NotPainless : Error { using Error::Error; };
struct PlanMismatch : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct DegenerateCorpus : Error { using Error::Error; };
struct Unsupported : Error { using Error::Error; };

// ratings
struct DegenerateScale : Error { using Error::Error; };
struct NoCommonPairs : Error { using Error::Error; };
struct MissingPair : Error { using Error::Error; };

// autodiff
struct ShapeError : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };

// vae / training
struct EmptySplit : Error { using Error::Error; };
struct UnknownClass : Error { using Error::Error; };
struct TrainDiverged : Error { using Error::Error; };

// descriptors / path synthesis
struct UndefinedDescriptor : Error { using Error::Error; };
struct StuckAtStep : Error { using Error::Error; };
struct EmptyTarget : Error { using Error::Error; };

// files
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

}  // namespace timbre
