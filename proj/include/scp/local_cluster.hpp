#pragma once

#include "combinators.hpp"
#include "reference_eval.hpp"

namespace scp {

// N worker nodes plus a driver (node 0), all over one instrumented loopback
// hub. The workhorse for tests and the bench --local mode.
class LocalCluster {
 public:
  LocalCluster(int num_workers, std::shared_ptr<const Registry> reg, NodeConfig proto = {})
      : hub_(std::make_shared<LoopbackHub>()) {
    std::vector<Place> places;
    for (int id = 0; id <= num_workers; ++id) places.push_back(Place{id, ""});
    for (int id = 0; id <= num_workers; ++id) {
      NodeConfig cfg = proto;
      cfg.self = places[id];
      cfg.peers = places;
      auto node = std::make_unique<NodeRuntime>(cfg, reg, std::make_shared<LoopbackTransport>(hub_));
      node->start();
      nodes_.push_back(std::move(node));
    }
  }

  ~LocalCluster() {
    for (auto& n : nodes_) n->stop();
  }

  NodeRuntime& driver() { return *nodes_[0]; }
  NodeRuntime& node(int id) { return *nodes_[static_cast<size_t>(id)]; }
  int workers() const { return static_cast<int>(nodes_.size()) - 1; }
  Place place(int id) const { return Place{id, ""}; }

  LoopbackHub& hub() { return *hub_; }
  FrameCounters counters() const { return hub_->counters(); }

 private:
  std::shared_ptr<LoopbackHub> hub_;
  std::vector<std::unique_ptr<NodeRuntime>> nodes_;
};

}  // namespace scp
