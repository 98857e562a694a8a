#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scp {

// Every failure the library can surface, shared between local calls,
// futures and wire-level Error replies.
enum class Errc : uint8_t {
  duplicate_body_id = 1,
  unknown_body_id,
  decode_failure,
  type_mismatch,
  unencodable_capture,
  unsupported_type,
  pickler_mismatch,
  unknown_pickler,
  node_unreachable,
  remote_eval_error,
  unknown_silo,
  builder_unknown,
  bind_failure,
  registry_mismatch,
  size_mismatch,
  frame_too_large,
};

inline std::string_view to_string(Errc c) {
  switch (c) {
    case Errc::duplicate_body_id: return "DuplicateBodyId";
    case Errc::unknown_body_id: return "UnknownBodyId";
    case Errc::decode_failure: return "DecodeFailure";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::unencodable_capture: return "UnencodableCapture";
    case Errc::unsupported_type: return "UnsupportedType";
    case Errc::pickler_mismatch: return "PicklerMismatch";
    case Errc::unknown_pickler: return "UnknownPickler";
    case Errc::node_unreachable: return "NodeUnreachable";
    case Errc::remote_eval_error: return "RemoteEvalError";
    case Errc::unknown_silo: return "UnknownSilo";
    case Errc::builder_unknown: return "BuilderUnknown";
    case Errc::bind_failure: return "BindFailure";
    case Errc::registry_mismatch: return "RegistryMismatch";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::frame_too_large: return "FrameTooLarge";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace scp
