#include "kgscatter/errors.hpp"

namespace kgs {

const char* to_string(ErrorKind k)
{
    switch (k) {
    case ErrorKind::LineIntersectsObstacle: return "LineIntersectsObstacle";
    case ErrorKind::RadiusTooSmall: return "RadiusTooSmall";
    case ErrorKind::ConvexHullViolation: return "ConvexHullViolation";
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::LinkingNotInteger: return "LinkingNotInteger";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::EvaluationTooCloseToDisk: return "EvaluationTooCloseToDisk";
    case ErrorKind::QuadratureNonConvergent: return "QuadratureNonConvergent";
    case ErrorKind::NonConvergent: return "NonConvergent";
    case ErrorKind::FluxMismatch: return "FluxMismatch";
    case ErrorKind::ClassValidation: return "ClassValidation";
    case ErrorKind::SlowDecay: return "SlowDecay";
    case ErrorKind::NoRepresentative: return "NoRepresentative";
    case ErrorKind::ClassCrossing: return "ClassCrossing";
    case ErrorKind::ConfigNotFieldFree: return "ConfigNotFieldFree";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::StabilityViolation: return "StabilityViolation";
    case ErrorKind::PacketEscaped: return "PacketEscaped";
    case ErrorKind::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorKind::UnwrapAmbiguity: return "UnwrapAmbiguity";
    case ErrorKind::InsufficientAngles: return "InsufficientAngles";
    case ErrorKind::PlaneBlocked: return "PlaneBlocked";
    case ErrorKind::MomentInversionIllposed: return "MomentInversionIllposed";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::BCorrectionNonConvergent: return "BCorrectionNonConvergent";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    }
    return "Unknown";
}

}  // namespace kgs
