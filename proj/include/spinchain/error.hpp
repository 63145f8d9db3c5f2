#pragma once

#include <stdexcept>
#include <string>

namespace spinchain {

enum class Errc {
  InvalidDimension,
  NearZeroVector,
  InvalidAxis,
  StepTooLarge,
  WindingNotZero,
  OutsideDomain,
  AntipodalStart,
  HemisphereViolated,
  NotNearEquator,
  SeriesTooShort,
  DegenerateSeries,
  EffectiveSampleSizeTooLow,
  StateSpaceTooLarge,
  NotConverged,
  InsufficientRareEvents,
  NoLabelFound,
  MissingResults,
  InvalidConfig,
  IoError,
  BadRecord,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace spinchain
