#pragma once

#include <stdexcept>
#include <string>

namespace treecoder {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or dimensions that do not line up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Values that are well-shaped but unusable (non-finite, empty, out of range).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes in an on-disk format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Labels and instances that cannot be attached to each other.
class PairingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedExport : public Error {
 public:
  using Error::Error;
};

// A gradient or parameter became non-finite during training.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace treecoder
