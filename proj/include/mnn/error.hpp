#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mnn {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, file contents or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The stiffness matrix is not positive definite: the network has at least
/// one displacement field that costs no elastic energy.
class ZeroModeError : public Error {
 public:
  ZeroModeError(const std::string& what, std::size_t dof = npos)
      : Error(what), dof_(dof) {}

  /// Free DOF whose pivot collapsed, or npos when unknown.
  std::size_t dof() const noexcept { return dof_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t dof_;
};

}  // namespace mnn
