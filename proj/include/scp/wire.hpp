#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "lineage.hpp"

namespace scp {

// Wire frames: u32 big-endian length, one tag byte, payload. Protocol struct
// payloads use the fixed positional layout below regardless of the
// configured user-data backend; user data rides inside them as opaque,
// pickler-id-labelled byte strings.
enum class MsgTag : uint8_t {
  handshake = 1,
  send_request = 2,
  send_reply = 3,
  error_reply = 4,
  populate_request = 5,
  pump_request = 6,
  emit_batch = 7,
  emit_ack = 8,
  pump_done = 9,
};

inline constexpr size_t kDefaultMaxFrame = 64ull << 20;

struct Handshake {
  int32_t node_id = -1;
  uint64_t registry_fingerprint = 0;
};

struct SendRequest {
  Uid request_id;
  LineagePtr lineage;
};

struct SendReply {
  Uid request_id;
  std::string pickler_id;  // empty for bare acknowledgements
  Bytes data;
};

struct ErrorReply {
  Uid request_id;
  Errc code = Errc::remote_eval_error;
  int32_t origin_node = -1;
  std::string text;
};

struct PopulateRequest {
  Uid request_id;
  SiloId silo_id;
  TypeTag type;
  std::string pickler_id;
  Bytes data;
};

struct PumpRequest {
  Uid pump_id;
  SiloId dest_silo;
  Place dest;
  uint8_t role = 0;  // 0 = left source, 1 = right source
  LineagePtr source;
  Spore fun;
  std::string builder_id;
};

struct EmitBatch {
  Uid pump_id;
  uint8_t role = 0;
  std::string pickler_id;
  std::vector<Bytes> elements;
};

struct EmitAck {
  Uid pump_id;
  uint8_t role = 0;
};

struct PumpDone {
  Uid pump_id;
  uint8_t role = 0;
};

using Message = std::variant<Handshake, SendRequest, SendReply, ErrorReply, PopulateRequest,
                             PumpRequest, EmitBatch, EmitAck, PumpDone>;

inline MsgTag tag_of_message(const Message& m) {
  return static_cast<MsgTag>(m.index() + 1);
}

// Encodes tag byte + payload (the frame body, without the length prefix).
inline Bytes encode_message(const Message& m) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(tag_of_message(m)));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Handshake>) {
          w.i32_le(v.node_id);
          w.u64_le(v.registry_fingerprint);
        } else if constexpr (std::is_same_v<T, SendRequest>) {
          wire::write_uid(w, v.request_id);
          wire::write_lineage(w, *v.lineage);
        } else if constexpr (std::is_same_v<T, SendReply>) {
          wire::write_uid(w, v.request_id);
          w.str(v.pickler_id);
          w.str(v.data);
        } else if constexpr (std::is_same_v<T, ErrorReply>) {
          wire::write_uid(w, v.request_id);
          w.u8(static_cast<uint8_t>(v.code));
          w.i32_le(v.origin_node);
          w.str(v.text);
        } else if constexpr (std::is_same_v<T, PopulateRequest>) {
          wire::write_uid(w, v.request_id);
          wire::write_uid(w, v.silo_id);
          w.str(v.type.canonical());
          w.str(v.pickler_id);
          w.str(v.data);
        } else if constexpr (std::is_same_v<T, PumpRequest>) {
          wire::write_uid(w, v.pump_id);
          wire::write_uid(w, v.dest_silo);
          wire::write_place(w, v.dest);
          w.u8(v.role);
          wire::write_lineage(w, *v.source);
          write_spore(w, v.fun);
          w.str(v.builder_id);
        } else if constexpr (std::is_same_v<T, EmitBatch>) {
          wire::write_uid(w, v.pump_id);
          w.u8(v.role);
          w.str(v.pickler_id);
          w.u32_be(static_cast<uint32_t>(v.elements.size()));
          for (const Bytes& e : v.elements) w.str(e);
        } else if constexpr (std::is_same_v<T, EmitAck>) {
          wire::write_uid(w, v.pump_id);
          w.u8(v.role);
        } else if constexpr (std::is_same_v<T, PumpDone>) {
          wire::write_uid(w, v.pump_id);
          w.u8(v.role);
        }
      },
      m);
  return w.take();
}

inline Message decode_message(std::string_view body) {
  ByteReader r(body);
  uint8_t tag = r.u8();
  Message m;
  switch (static_cast<MsgTag>(tag)) {
    case MsgTag::handshake: {
      Handshake v;
      v.node_id = r.i32_le();
      v.registry_fingerprint = r.u64_le();
      m = std::move(v);
      break;
    }
    case MsgTag::send_request: {
      SendRequest v;
      v.request_id = wire::read_uid(r);
      v.lineage = wire::read_lineage(r);
      m = std::move(v);
      break;
    }
    case MsgTag::send_reply: {
      SendReply v;
      v.request_id = wire::read_uid(r);
      v.pickler_id = std::string(r.str());
      v.data = Bytes(r.str());
      m = std::move(v);
      break;
    }
    case MsgTag::error_reply: {
      ErrorReply v;
      v.request_id = wire::read_uid(r);
      v.code = static_cast<Errc>(r.u8());
      v.origin_node = r.i32_le();
      v.text = std::string(r.str());
      m = std::move(v);
      break;
    }
    case MsgTag::populate_request: {
      PopulateRequest v;
      v.request_id = wire::read_uid(r);
      v.silo_id = wire::read_uid(r);
      v.type = TypeTag::parse(r.str());
      v.pickler_id = std::string(r.str());
      v.data = Bytes(r.str());
      m = std::move(v);
      break;
    }
    case MsgTag::pump_request: {
      PumpRequest v;
      v.pump_id = wire::read_uid(r);
      v.dest_silo = wire::read_uid(r);
      v.dest = wire::read_place(r);
      v.role = r.u8();
      v.source = wire::read_lineage(r);
      v.fun = read_spore(r);
      v.builder_id = std::string(r.str());
      m = std::move(v);
      break;
    }
    case MsgTag::emit_batch: {
      EmitBatch v;
      v.pump_id = wire::read_uid(r);
      v.role = r.u8();
      v.pickler_id = std::string(r.str());
      uint32_t n = r.u32_be();
      v.elements.reserve(n);
      for (uint32_t i = 0; i < n; ++i) v.elements.emplace_back(r.str());
      m = std::move(v);
      break;
    }
    case MsgTag::emit_ack: {
      EmitAck v;
      v.pump_id = wire::read_uid(r);
      v.role = r.u8();
      m = std::move(v);
      break;
    }
    case MsgTag::pump_done: {
      PumpDone v;
      v.pump_id = wire::read_uid(r);
      v.role = r.u8();
      m = std::move(v);
      break;
    }
    default:
      raise(Errc::decode_failure, "unknown message tag " + std::to_string(tag));
  }
  r.expect_end();
  return m;
}

// Prepends the length prefix.
inline Bytes frame_bytes(const Bytes& body) {
  ByteWriter w;
  w.u32_be(static_cast<uint32_t>(body.size()));
  w.raw(body);
  return w.take();
}

// Incremental splitter for a byte stream of frames.
class FrameReader {
 public:
  explicit FrameReader(size_t max_frame = kDefaultMaxFrame) : max_frame_(max_frame) {}

  void feed(std::string_view data) { buf_.append(data.data(), data.size()); }

  // Returns the next complete frame body, or nullopt if more bytes are needed.
  std::optional<Bytes> next() {
    if (buf_.size() < 4) return std::nullopt;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<uint8_t>(buf_[i]);
    if (len > max_frame_)
      raise(Errc::frame_too_large, "frame of " + std::to_string(len) + " bytes exceeds limit");
    if (buf_.size() < 4 + static_cast<size_t>(len)) return std::nullopt;
    Bytes body = buf_.substr(4, len);
    buf_.erase(0, 4 + static_cast<size_t>(len));
    return body;
  }

 private:
  size_t max_frame_;
  Bytes buf_;
};

}  // namespace scp
