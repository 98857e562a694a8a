#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "wire.hpp"

namespace scp {

// Moves frame bodies between nodes. Implementations must deliver frames from
// one sender to one receiver in send order (FIFO per channel) and may call
// the deliver callback from any thread; receivers do their own queueing.
class Transport {
 public:
  using Deliver = std::function<void(int32_t from, Bytes body)>;

  virtual ~Transport() = default;

  virtual void start(int32_t self_id, uint64_t registry_fingerprint, Deliver deliver) = 0;
  virtual void stop() = 0;

  // Sends one frame body. Throws NodeUnreachable when the destination cannot
  // be reached and RegistryMismatch when the peer's registry disagrees.
  virtual void send(const Place& dest, const Bytes& body) = 0;

  // Forces a connection + handshake with the peer (liveness probe).
  virtual void probe(const Place& peer) = 0;
};

struct FrameCounters {
  uint64_t frames = 0;
  uint64_t bytes = 0;
  std::array<uint64_t, 16> per_tag{};

  uint64_t of(MsgTag t) const { return per_tag[static_cast<size_t>(t)]; }

  friend FrameCounters operator-(FrameCounters a, const FrameCounters& b) {
    a.frames -= b.frames;
    a.bytes -= b.bytes;
    for (size_t i = 0; i < a.per_tag.size(); ++i) a.per_tag[i] -= b.per_tag[i];
    return a;
  }
};

// In-process transport shared by a set of nodes. Delivery is synchronous
// hand-off to the receiver's deliver callback (which enqueues), so per
// channel FIFO order follows from the sender's program order. Counts every
// frame and its framed byte length, which the laziness and message-economy
// tests assert on exactly.
class LoopbackHub {
 public:
  void attach(int32_t id, uint64_t fingerprint, Transport::Deliver deliver) {
    std::lock_guard lk(m_);
    if (!nodes_.empty() && fingerprint != fingerprint_)
      raise(Errc::registry_mismatch, "node " + std::to_string(id) +
                                         " joined with a different registry fingerprint");
    if (nodes_.empty()) fingerprint_ = fingerprint;
    nodes_[id] = std::move(deliver);
  }

  void detach(int32_t id) {
    std::lock_guard lk(m_);
    nodes_.erase(id);
  }

  void send(int32_t from, int32_t to, const Bytes& body) {
    // delivery stays under the hub lock: after detach() returns, no further
    // callback into that node can be in flight
    std::lock_guard lk(m_);
    auto it = nodes_.find(to);
    if (it == nodes_.end())
      raise(Errc::node_unreachable, "node " + std::to_string(to) + " is not attached");
    counters_.frames += 1;
    counters_.bytes += 4 + body.size();
    if (!body.empty()) {
      uint8_t tag = static_cast<uint8_t>(body[0]);
      if (tag < counters_.per_tag.size()) counters_.per_tag[tag] += 1;
    }
    it->second(from, body);
  }

  bool attached(int32_t id) const {
    std::lock_guard lk(m_);
    return nodes_.count(id) > 0;
  }

  FrameCounters counters() const {
    std::lock_guard lk(m_);
    return counters_;
  }

 private:
  mutable std::mutex m_;
  std::map<int32_t, Transport::Deliver> nodes_;
  uint64_t fingerprint_ = 0;
  FrameCounters counters_;
};

class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(std::shared_ptr<LoopbackHub> hub) : hub_(std::move(hub)) {}

  void start(int32_t self_id, uint64_t fingerprint, Deliver deliver) override {
    self_ = self_id;
    hub_->attach(self_id, fingerprint, std::move(deliver));
  }

  void stop() override {
    if (self_ >= 0) hub_->detach(self_);
    self_ = -1;
  }

  void send(const Place& dest, const Bytes& body) override { hub_->send(self_, dest.node_id, body); }

  void probe(const Place& peer) override {
    if (!hub_->attached(peer.node_id))
      raise(Errc::node_unreachable, "node " + std::to_string(peer.node_id) + " is not attached");
  }

  LoopbackHub& hub() { return *hub_; }

 private:
  std::shared_ptr<LoopbackHub> hub_;
  int32_t self_ = -1;
};

}  // namespace scp
