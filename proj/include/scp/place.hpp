#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace scp {

// A cluster node identity plus its dialable address ("host:port"; empty when
// the transport routes by id alone, as the loopback hub does).
struct Place {
  int32_t node_id = -1;
  std::string address;

  friend bool operator==(const Place& a, const Place& b) { return a.node_id == b.node_id; }
};

// Globally unique id minted by one node: (origin node, per-origin counter).
// Used for silos, requests and pumps alike.
struct Uid {
  int32_t origin = -1;
  uint64_t seq = 0;

  friend bool operator==(const Uid&, const Uid&) = default;
  friend auto operator<=>(const Uid&, const Uid&) = default;
};

using SiloId = Uid;

inline std::string to_string(const Uid& u) {
  return std::to_string(u.origin) + "." + std::to_string(u.seq);
}

struct UidHash {
  size_t operator()(const Uid& u) const {
    return std::hash<uint64_t>()(u.seq * 1000003u + static_cast<uint64_t>(u.origin));
  }
};

}  // namespace scp
