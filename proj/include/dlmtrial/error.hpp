#pragma once

#include <stdexcept>
#include <string>

namespace dlmtrial {

/// Non-finite or otherwise impossible numbers reached the filter, the weight
/// rules or the Bayes factor.
class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A live-session operation was attempted in the wrong phase.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed configuration or file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dlmtrial
