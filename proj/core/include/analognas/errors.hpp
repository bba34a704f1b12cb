#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace analognas {

// Index or parameter outside its documented domain.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Malformed textual input (NB201 strings, architecture lists, configs).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary input that does not match its record layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// An input file does not exist or cannot be opened.
class FileNotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class UnsupportedLayerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stored value breaks its field invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& field, std::size_t line, const std::string& detail)
      : std::runtime_error("line " + std::to_string(line) + ": field '" + field + "': " + detail),
        field_(field),
        line_(line) {}
  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

class SchemaVersionError : public std::runtime_error {
 public:
  SchemaVersionError(int found, int expected)
      : std::runtime_error("benchmark schema version " + std::to_string(found) +
                           " requires migration to version " + std::to_string(expected)),
        found_(found) {}
  int found() const noexcept { return found_; }

 private:
  int found_;
};

class MetadataMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string join_indices(const std::vector<std::uint32_t>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(indices[i]);
  }
  return out;
}
}  // namespace detail

class MergeConflictError : public std::runtime_error {
 public:
  explicit MergeConflictError(std::vector<std::uint32_t> indices)
      : std::runtime_error("conflicting records for arch indices: " + detail::join_indices(indices)),
        indices_(std::move(indices)) {}
  const std::vector<std::uint32_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::uint32_t> indices_;
};

class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(std::uint32_t index)
      : std::runtime_error("no benchmark record for arch index " + std::to_string(index)), index_(index) {}
  std::uint32_t index() const noexcept { return index_; }

 private:
  std::uint32_t index_;
};

class IncompleteTableError : public std::runtime_error {
 public:
  explicit IncompleteTableError(std::vector<std::uint32_t> missing)
      : std::runtime_error("benchmark table is missing arch indices: " + detail::join_indices(missing)),
        missing_(std::move(missing)) {}
  const std::vector<std::uint32_t>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::uint32_t> missing_;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure inside one stage of the per-architecture pipeline.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error("pipeline stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace analognas
