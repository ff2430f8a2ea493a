#pragma once
#include <stdexcept>
#include <string>

namespace z2eigen {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometry / atlas
struct DegenerateGraph : Error { using Error::Error; };
struct CoverageFailure : Error { using Error::Error; };
struct OutsideChart : Error { using Error::Error; };
struct AtBranchPoint : Error { using Error::Error; };
struct OnCut : Error { using Error::Error; };
struct PoleSingularity : Error { using Error::Error; };
struct SamplingStalled : Error { using Error::Error; };
struct InvalidConfiguration : Error { using Error::Error; };

// Differentiation / training
struct JetOverflow : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct FitIllConditioned : Error { using Error::Error; };

// I/O
struct IoError : Error { using Error::Error; };
struct ConfigParseError : Error { using Error::Error; };
struct CheckpointMismatch : Error { using Error::Error; };

}  // namespace z2eigen
