#include "pcstream/errors.hpp"

namespace pcstream {

const char* to_string(DecodeErrc code) noexcept {
  switch (code) {
    case DecodeErrc::short_buffer:
      return "short buffer";
    case DecodeErrc::bad_magic:
      return "bad magic";
    case DecodeErrc::unknown_codec:
      return "unknown codec id";
    case DecodeErrc::length_mismatch:
      return "length mismatch";
    case DecodeErrc::invalid_field:
      return "invalid field";
    case DecodeErrc::unknown_message_type:
      return "unknown message type";
  }
  return "unknown decode error";
}

DecodeError::DecodeError(DecodeErrc code, const std::string& detail)
    : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace pcstream
