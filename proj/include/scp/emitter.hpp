#pragma once

#include "builder.hpp"
#include "pickle.hpp"

namespace scp {

// Streaming output handle handed to pump spores. Each value is encoded at
// emit time with the pickler for its static type under the active backend;
// where the encoded bytes go (network batches, a local builder) is the
// subclass's concern.
class Emitter {
 public:
  explicit Emitter(Backend backend) : backend_(backend) {}
  virtual ~Emitter() = default;

  template <Picklable V>
  void emit(const V& v) {
    ByteWriter w;
    PickleTraits<V>::encode(w, v, backend_);
    push(pickler_ids_for<V>()[static_cast<int>(backend_)], w.take());
  }

  Backend backend() const { return backend_; }

 protected:
  virtual void push(const std::string& pickler_id, Bytes encoded) = 0;

 private:
  Backend backend_;
};

}  // namespace scp
