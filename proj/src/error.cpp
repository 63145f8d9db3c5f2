#include "spinchain/error.hpp"

namespace spinchain {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidDimension: return "InvalidDimension";
    case Errc::NearZeroVector: return "NearZeroVector";
    case Errc::InvalidAxis: return "InvalidAxis";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::WindingNotZero: return "WindingNotZero";
    case Errc::OutsideDomain: return "OutsideDomain";
    case Errc::AntipodalStart: return "AntipodalStart";
    case Errc::HemisphereViolated: return "HemisphereViolated";
    case Errc::NotNearEquator: return "NotNearEquator";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::DegenerateSeries: return "DegenerateSeries";
    case Errc::EffectiveSampleSizeTooLow: return "EffectiveSampleSizeTooLow";
    case Errc::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case Errc::NotConverged: return "NotConverged";
    case Errc::InsufficientRareEvents: return "InsufficientRareEvents";
    case Errc::NoLabelFound: return "NoLabelFound";
    case Errc::MissingResults: return "MissingResults";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
    case Errc::BadRecord: return "BadRecord";
  }
  return "UnknownError";
}

}  // namespace spinchain
