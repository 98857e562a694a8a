#pragma once

#include "runtime.hpp"

namespace scp {

namespace detail {

// Decodes a reply payload as T, accepting either backend (the payload names
// the pickler that produced it).
template <Picklable T>
T decode_reply(const ReplyPayload& p) {
  const auto& ids = pickler_ids_for<T>();
  Backend b;
  if (p.pickler_id == ids[static_cast<int>(Backend::specialized)])
    b = Backend::specialized;
  else if (p.pickler_id == ids[static_cast<int>(Backend::generic)])
    b = Backend::generic;
  else
    raise(Errc::pickler_mismatch, "reply was encoded by '" + p.pickler_id +
                                      "', expected a pickler for " +
                                      PickleTraits<T>::tag().canonical());
  return unpickle<T>(p.data, b);
}

}  // namespace detail

// Typed proxy to a silo, possibly remote and possibly not yet materialized.
// Immutable: two sends on the same ref denote the same silo. Building
// derived refs with apply() is free of network traffic.
template <class T>
class SiloRef {
 public:
  SiloRef() = default;
  SiloRef(NodeRuntime* rt, LineagePtr lineage) : rt_(rt), lineage_(std::move(lineage)) {}

  const LineagePtr& lineage() const { return lineage_; }
  SiloId id() const { return lineage_->result_id; }
  const Place& place() const { return lineage_->place; }
  NodeRuntime& runtime() const { return *rt_; }

  // Lazy: records the operation in the lineage and returns immediately.
  template <class S>
  SiloRef<S> apply(const SporeFn<T, S>& s) const {
    LineagePtr lin = Lineage::apply(rt_->new_silo_id(), tag_of<S>(), lineage_, s.spore());
    return SiloRef<S>(rt_, std::move(lin));
  }

  // Eager: ships the queued operations to the silo's node, forces
  // materialization there and returns the data asynchronously.
  Future<T> send() const
    requires Picklable<T>
  {
    return rt_->request_send(lineage_).template map<T>(
        [](const ReplyPayload& p) { return detail::decode_reply<T>(p); });
  }

  // The undecoded reply (pickler id + payload bytes).
  Future<ReplyPayload> send_raw() const { return rt_->request_send(lineage_); }

 private:
  NodeRuntime* rt_ = nullptr;
  LineagePtr lineage_;
};

// Creates a Source silo holding `data` at `place` and blocks until the node
// acknowledges it.
template <Picklable E>
SiloRef<std::vector<E>> populate(NodeRuntime& rt, const Place& place, const std::vector<E>& data) {
  using T = std::vector<E>;
  SiloId id = rt.new_silo_id();
  Backend b = rt.config().backend;
  Future<ReplyPayload> ack = rt.request_populate(
      id, place, tag_of<T>(), pickler_ids_for<T>()[static_cast<int>(b)], pickle(data, b));
  ack.get();  // NodeUnreachable / decode errors propagate here
  return SiloRef<T>(&rt, Lineage::source(id, tag_of<T>(), rt.peer(place.node_id)));
}

// Streams the elements of both source silos through `fun`; emitted values
// fill a builder-made silo at `dest`. Lazy like apply.
template <class R, Picklable U, Picklable V>
SiloRef<R> pump_to(NodeRuntime& rt, const Place& dest, const SiloRef<std::vector<U>>& left,
                   const SiloRef<std::vector<U>>& right, const PumpFn<U, V>& fun,
                   const std::string& builder_id) {
  LineagePtr lin = Lineage::pump_to(rt.new_silo_id(), tag_of<R>(), dest, left.lineage(),
                                    right.lineage(), fun.spore(), builder_id);
  return SiloRef<R>(&rt, std::move(lin));
}

// Common case: collect emitted values into a std::vector<V>.
template <Picklable U, Picklable V>
SiloRef<std::vector<V>> pump_to_vector(NodeRuntime& rt, const Place& dest,
                                       const SiloRef<std::vector<U>>& left,
                                       const SiloRef<std::vector<U>>& right,
                                       const PumpFn<U, V>& fun) {
  return pump_to<std::vector<V>>(rt, dest, left, right, fun, vector_builder_id<V>());
}

}  // namespace scp
