#ifndef SIMT_ERROR_HPP
#define SIMT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace simt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (corpora, checkpoints, streams).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch)
      : Error("diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace simt

#endif  // SIMT_ERROR_HPP
