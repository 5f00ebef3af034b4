#pragma once

#include <stdexcept>
#include <string>

namespace xdoc {

// Coarse category used by the CLI to pick an exit code:
// usage/config -> 2, data -> 3, numeric -> 4.
enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

// Tensor/op contract violations.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class RankError : public Error {
 public:
  explicit RankError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class IndexError : public Error {
 public:
  IndexError(const std::string& msg, long long offending)
      : Error(ErrorKind::Data, msg), offending_(offending) {}
  long long offending() const { return offending_; }

 private:
  long long offending_;
};

// Fully masked softmax row / all-false attention mask.
class MaskError : public Error {
 public:
  explicit MaskError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

// Cross entropy with zero active positions.
class EmptyLossError : public Error {
 public:
  explicit EmptyLossError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

// Vocab / corpus / checkpoint file problems.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

// HTML parsing; carries the byte offset of the failure.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, size_t offset)
      : Error(ErrorKind::Data, msg), offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

class DepthOverflowError : public Error {
 public:
  DepthOverflowError(const std::string& msg, std::string path)
      : Error(ErrorKind::Data, msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ArityError : public Error {
 public:
  explicit ArityError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

// NaN/Inf mid-training, corrupted adjoints and friends.
class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

// grad_check saw two forward passes disagree.
class DeterminismError : public Error {
 public:
  explicit DeterminismError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};

class CheckpointVersionError : public Error {
 public:
  explicit CheckpointVersionError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

class CheckpointCorruptionError : public Error {
 public:
  explicit CheckpointCorruptionError(const std::string& msg) : Error(ErrorKind::Data, msg) {}
};

}  // namespace xdoc
