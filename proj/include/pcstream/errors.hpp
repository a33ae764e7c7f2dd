#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace pcstream {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or document (PLY header, config file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain invariant. `index` names the offending element
/// (vertex index, point index) when one applies.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : Error(what), index_(index) {}

  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  std::optional<std::size_t> index_;
};

enum class DecodeErrc : std::uint8_t {
  short_buffer,
  bad_magic,
  unknown_codec,
  length_mismatch,
  invalid_field,
  unknown_message_type,
};

const char* to_string(DecodeErrc code) noexcept;

/// Byte-level decode failure; `code()` identifies which check failed.
class DecodeError : public Error {
 public:
  DecodeError(DecodeErrc code, const std::string& detail);

  DecodeErrc code() const noexcept { return code_; }

 private:
  DecodeErrc code_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

/// Protocol misuse on an otherwise healthy connection (e.g. SUBSCRIBE before SETUP).
class SessionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcstream
