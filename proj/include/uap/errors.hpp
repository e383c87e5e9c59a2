#pragma once

#include <stdexcept>
#include <string>

namespace uap {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// WAV decoding.
class WavError : public Error {
 public:
  using Error::Error;
};
class SampleRateMismatch : public WavError {
 public:
  using WavError::WavError;
};
class ChannelMismatch : public WavError {
 public:
  using WavError::WavError;
};
class BitDepthMismatch : public WavError {
 public:
  using WavError::WavError;
};
class TooLong : public WavError {
 public:
  using WavError::WavError;
};
class MalformedWav : public WavError {
 public:
  using WavError::WavError;
};

// dB of an all-zero signal would be -inf; reported as this error instead.
class SilentSignal : public Error {
 public:
  using Error::Error;
};

class NoEnergy : public Error {
 public:
  using Error::Error;
};

// Parameter / perturbation files.
class FormatError : public Error {
 public:
  using Error::Error;
};
class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

}  // namespace uap
