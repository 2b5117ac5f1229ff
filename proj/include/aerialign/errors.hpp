#pragma once

#include <stdexcept>
#include <string>

namespace aer {

/// Base for all library errors; `stage()` tags which subsystem threw.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

#define AER_DEFINE_ERROR(Name)                              \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& what)                  \
        : Error(#Name, what) {}                             \
  }

AER_DEFINE_ERROR(AngleNearPi);
AER_DEFINE_ERROR(EmptyCloud);
AER_DEFINE_ERROR(InvalidParameter);
AER_DEFINE_ERROR(InsufficientPoints);
AER_DEFINE_ERROR(TooFewPoints);
AER_DEFINE_ERROR(DuplicateVariable);
AER_DEFINE_ERROR(UnknownVariable);
AER_DEFINE_ERROR(GaugeUnfixed);
AER_DEFINE_ERROR(NumericalFailure);
AER_DEFINE_ERROR(NoOverlap);
AER_DEFINE_ERROR(AllTilesDegenerate);
AER_DEFINE_ERROR(EmptyWindow);
AER_DEFINE_ERROR(ShapeMismatch);
AER_DEFINE_ERROR(OutOfBounds);
AER_DEFINE_ERROR(NoModality);
AER_DEFINE_ERROR(WindowExceedsMap);
AER_DEFINE_ERROR(NonFiniteGradient);
AER_DEFINE_ERROR(InvalidConfig);
AER_DEFINE_ERROR(RouteOutOfBounds);
AER_DEFINE_ERROR(ParseError);
AER_DEFINE_ERROR(UnsupportedProperty);
AER_DEFINE_ERROR(InconsistentDimensions);
AER_DEFINE_ERROR(LengthMismatch);
AER_DEFINE_ERROR(EmptyInput);

#undef AER_DEFINE_ERROR

}  // namespace aer
