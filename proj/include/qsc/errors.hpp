#ifndef QSC_ERRORS_HPP
#define QSC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qsc {

// Every failure the library raises derives from Error so callers can catch
// one type; the subclasses keep failure modes distinguishable.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Argument outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain_error"; }
};

// Arguments individually valid but mutually contradictory.
class InconsistencyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "inconsistency_error"; }
};

// Operation called in a mode it does not support.
class MisuseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "misuse_error"; }
};

class TimeoutError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "timeout_error"; }
};

class CalibrationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "calibration_error"; }
};

// Configuration problem. field() is the dotted path of the offending key
// (e.g. "collapse.t_c_mean"), empty for file-level failures.
class ConfigError : public Error {
 public:
  enum class Reason { MissingFile, Parse, Validation };

  ConfigError(Reason reason, std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        reason_(reason),
        field_(std::move(field)) {}

  Reason reason() const noexcept { return reason_; }
  const std::string& field() const noexcept { return field_; }

  const char* kind() const noexcept override {
    switch (reason_) {
      case Reason::MissingFile: return "config_missing_file";
      case Reason::Parse: return "config_parse_error";
      case Reason::Validation: return "config_validation_error";
    }
    return "config_error";
  }

 private:
  Reason reason_;
  std::string field_;
};

}  // namespace qsc

#endif  // QSC_ERRORS_HPP
