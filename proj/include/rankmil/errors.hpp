#pragma once

#include <stdexcept>
#include <string>

namespace rankmil {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (dimensions, ranges, counts).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed convergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed feature file, manifest, checkpoint or CSV.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that is semantically unusable: duplicate ids, missing
/// files, dimension mismatches, labels outside {0,1}.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A metric or statistic that is undefined for its input (single class,
/// constant vector).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Training diverged or could not start.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankmil
