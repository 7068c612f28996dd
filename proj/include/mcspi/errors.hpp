#pragma once

#include <stdexcept>
#include <string>

namespace mcspi {

// Invalid argument or numeric precondition (non power-of-two size, odd n, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Requested object does not fit in memory / index range.
class CapacityError : public std::length_error {
public:
  using std::length_error::length_error;
};

// Stream / plan / fix alignment violated.
class ProtocolError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Zero-order moment below the signal floor: nothing to locate.
class NoObjectError : public DomainError {
public:
  using DomainError::DomainError;
};

// Malformed configuration or unreadable input file.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyAccumulatorError : public DomainError {
public:
  using DomainError::DomainError;
};

}  // namespace mcspi
