#pragma once

#include <stdexcept>
#include <string>

namespace nlos {

/// Error categories map onto CLI exit codes (config=2, data=3, numerical=4).
enum class ErrorCategory { config = 2, data = 3, numerical = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory cat, std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), category_(cat), name_(std::move(name)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& name() const noexcept { return name_; }

private:
  ErrorCategory category_;
  std::string name_;
};

#define NLOS_DEFINE_ERROR(NAME, CATEGORY)                                     \
  class NAME : public Error {                                                 \
  public:                                                                     \
    explicit NAME(const std::string& what)                                    \
        : Error(ErrorCategory::CATEGORY, #NAME, what) {}                      \
  }

// geometry
NLOS_DEFINE_ERROR(RayParallelToWall, numerical);
NLOS_DEFINE_ERROR(BehindCamera, numerical);
NLOS_DEFINE_ERROR(DegeneratePointSet, numerical);

// lct
NLOS_DEFINE_ERROR(ExtentMismatch, config);
NLOS_DEFINE_ERROR(SingularDepth, numerical);
NLOS_DEFINE_ERROR(GridMismatch, config);

// simulator
NLOS_DEFINE_ERROR(ObjectBehindWall, numerical);
NLOS_DEFINE_ERROR(LengthMismatch, config);

// particle_filter
NLOS_DEFINE_ERROR(BoundsDimensionMismatch, config);
NLOS_DEFINE_ERROR(AllZeroWeights, numerical);
NLOS_DEFINE_ERROR(TooFewParticles, config);

// reconstruction
NLOS_DEFINE_ERROR(EmptyCloud, data);

// dataset
NLOS_DEFINE_ERROR(CorruptManifest, data);
NLOS_DEFINE_ERROR(ShapeMismatch, data);
NLOS_DEFINE_ERROR(MissingArray, data);

// cli
NLOS_DEFINE_ERROR(ConfigError, config);

#undef NLOS_DEFINE_ERROR

}  // namespace nlos
