#pragma once

#include <stdexcept>
#include <string>

namespace hmpdrl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct GenerationError : Error {
  using Error::Error;
};

struct SamplingExhausted : Error {
  using Error::Error;
};

struct InvalidEndpoint : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

}  // namespace hmpdrl
