#pragma once

#include <stdexcept>
#include <string>

namespace pvqml {

/// Category carried by every library exception; the C API maps these
/// one-to-one onto pvq_status codes.
enum class ErrorKind {
  Config,
  Shape,
  Contract,
  Parse,
  Schema,
  Cleaning,
  Scaling,
  Unsupported,
  Training,
  Io,
  Format,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PVQML_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

PVQML_DEFINE_ERROR(ConfigError, Config)
PVQML_DEFINE_ERROR(ShapeError, Shape)
PVQML_DEFINE_ERROR(ContractError, Contract)
PVQML_DEFINE_ERROR(ParseError, Parse)
PVQML_DEFINE_ERROR(SchemaError, Schema)
PVQML_DEFINE_ERROR(CleaningError, Cleaning)
PVQML_DEFINE_ERROR(ScalingError, Scaling)
PVQML_DEFINE_ERROR(UnsupportedCircuitError, Unsupported)
PVQML_DEFINE_ERROR(TrainingError, Training)
PVQML_DEFINE_ERROR(IoError, Io)
PVQML_DEFINE_ERROR(FormatError, Format)

#undef PVQML_DEFINE_ERROR

}  // namespace pvqml
