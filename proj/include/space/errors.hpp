#pragma once

#include <stdexcept>
#include <string>

namespace space {

// Bad argument value (non-finite angle, out-of-range augmentation, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input violates an operation's precondition on coordinate space or shape.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Anchor landmarks coincide, so a normalization is undefined.
class DegenerateFace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Audio and video frame counts differ by more than the alignment slack.
class MisalignedClip : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace space
