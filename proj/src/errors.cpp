#include "proxauth/errors.hpp"

namespace proxauth {

std::string_view err_name(Err e) {
  switch (e) {
    case Err::EmptyKeyMaterial: return "EmptyKeyMaterial";
    case Err::MacMismatch: return "MacMismatch";
    case Err::BadPadding: return "BadPadding";
    case Err::MalformedEnvelope: return "MalformedEnvelope";
    case Err::MalformedAuthString: return "MalformedAuthString";
    case Err::MalformedMessage: return "MalformedMessage";
    case Err::DuplicateEmail: return "DuplicateEmail";
    case Err::UnknownEmail: return "UnknownEmail";
    case Err::SessionAlreadyActive: return "SessionAlreadyActive";
    case Err::IdentificationFailed: return "IdentificationFailed";
    case Err::NoMatchingUser: return "NoMatchingUser";
    case Err::BiometricMismatch: return "BiometricMismatch";
    case Err::SessionExpired: return "SessionExpired";
    case Err::TokenMismatch: return "TokenMismatch";
    case Err::TokenAlreadyConsumed: return "TokenAlreadyConsumed";
    case Err::InvalidState: return "InvalidState";
    case Err::LoginFailed: return "LoginFailed";
    case Err::NotInProximity: return "NotInProximity";
    case Err::NothingStaged: return "NothingStaged";
    case Err::Bt1NotFound: return "Bt1NotFound";
    case Err::NotFound: return "NotFound";
    case Err::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace proxauth
