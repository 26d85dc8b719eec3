#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace proxauth {

/// Protocol-level error codes. These are outcomes, not exceptions: a failed
/// MAC check or a replayed token is normal operation for a verifier.
enum class Err {
  EmptyKeyMaterial,
  MacMismatch,
  BadPadding,
  MalformedEnvelope,
  MalformedAuthString,
  MalformedMessage,
  DuplicateEmail,
  UnknownEmail,
  SessionAlreadyActive,
  IdentificationFailed,
  NoMatchingUser,
  BiometricMismatch,
  SessionExpired,
  TokenMismatch,
  TokenAlreadyConsumed,
  InvalidState,
  LoginFailed,
  NotInProximity,
  NothingStaged,
  Bt1NotFound,
  NotFound,
  ConfigError,
};

std::string_view err_name(Err e);

struct Error {
  Err code;
  std::string detail;

  explicit Error(Err c, std::string d = {}) : code(c), detail(std::move(d)) {}

  std::string to_string() const {
    std::string s{err_name(code)};
    if (!detail.empty()) {
      s += ": ";
      s += detail;
    }
    return s;
  }
};

/// Minimal value-or-error holder for protocol operations.
template <typename T>
class Expected {
 public:
  Expected(T value) : v_(std::move(value)) {}
  Expected(Error err) : v_(std::move(err)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Expected::value on error: " + error().to_string());
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Expected::value on error: " + error().to_string());
    return std::get<T>(std::move(v_));
  }
  const T* operator->() const { return &value(); }
  const T& operator*() const { return value(); }

  const Error& error() const {
    if (ok()) throw std::logic_error("Expected::error on value");
    return std::get<Error>(v_);
  }
  Err code() const { return error().code; }

 private:
  std::variant<T, Error> v_;
};

/// Outcome of an operation with no payload.
class Status {
 public:
  Status() = default;
  Status(Error err) : err_(std::move(err)) {}

  static Status success() { return Status(); }

  bool ok() const { return !err_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Error& error() const { return *err_; }
  Err code() const { return err_->code; }

 private:
  std::optional<Error> err_;
};

}  // namespace proxauth
