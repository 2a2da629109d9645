#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vannot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public FormatError {
 public:
  TruncationError(const std::string& what, long index)
      : FormatError(what), index_(index) {}
  // Frame (or field) ordinal at which the payload ran out.
  long index() const { return index_; }

 private:
  long index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class RateControlError : public Error {
 public:
  RateControlError(const std::string& what, double min_bits, double max_bits)
      : Error(what), min_bits_(min_bits), max_bits_(max_bits) {}
  // Achievable total bits at the coarsest and finest base QP.
  double min_bits() const { return min_bits_; }
  double max_bits() const { return max_bits_; }

 private:
  double min_bits_;
  double max_bits_;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  AdapterError(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class DegenerateRegionError : public Error {
 public:
  enum class Side { kInside, kOutside };
  DegenerateRegionError(const std::string& what, Side side)
      : Error(what), side_(side) {}
  Side side() const { return side_; }

 private:
  Side side_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& what, std::string blocking_id = {})
      : Error(what), blocking_id_(std::move(blocking_id)) {}
  // Id of the resource in the way (e.g. the running job), if any.
  const std::string& blocking_id() const { return blocking_id_; }

 private:
  std::string blocking_id_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class PolicyError : public Error {
 public:
  PolicyError(const std::string& what, long remaining_seconds)
      : Error(what), remaining_seconds_(remaining_seconds) {}
  long remaining_seconds() const { return remaining_seconds_; }

 private:
  long remaining_seconds_;
};

}  // namespace vannot
