#pragma once

#include <stdexcept>
#include <string>

namespace poet {

// Error taxonomy shared by all components. The kind maps to a distinct
// process exit code in the CLI.
enum class ErrorKind {
  Dimension,    // tensor/matrix shape mismatch
  Axis,         // invalid axis for a reduction/normalization
  Input,        // invalid argument value (non-finite, out of range, empty)
  Contract,     // API precondition violated (e.g. non-scalar loss)
  Degeneracy,   // numerically degenerate input (e.g. parallel 6D vectors)
  BehindCamera, // projection of a point with z <= 0
  Config,       // invalid or inconsistent configuration
  Capacity,     // more inputs than a configured maximum
  Class,        // class id out of range for class-specific heads
  Packing,      // scene packing failed after bounded retries
  Parse,        // malformed file
  TrainingFault,// NaN gradient or similar optimizer-visible fault
  UndefinedLoss,// loss undefined (zero objects in batch)
  Version,      // file format / checkpoint version mismatch
  Io,           // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace poet
