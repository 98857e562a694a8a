#pragma once

#include <any>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pickler_registry.hpp"

namespace scp {

// Destination-side accumulator for one pump. add()/add_encoded() feed
// elements; finish() may be called exactly once.
class Builder {
 public:
  virtual ~Builder() = default;
  virtual void add(std::any v) = 0;
  // Fast path: decode straight out of an EmitBatch payload.
  virtual void add_encoded(std::string_view pickler_id, std::string_view bytes) = 0;
  virtual std::any finish() = 0;
  virtual size_t count() const = 0;
};

struct BuilderFactory {
  std::string id;
  TypeTag elem;
  TypeTag result;
  std::function<std::unique_ptr<Builder>()> make;
};

class BuilderRegistry {
 public:
  void ensure(BuilderFactory f) { by_id_.emplace(f.id, std::move(f)); }

  const BuilderFactory* maybe_by_id(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &it->second;
  }

  const BuilderFactory& by_id(std::string_view id) const {
    if (const BuilderFactory* f = maybe_by_id(id)) return *f;
    raise(Errc::builder_unknown, "no builder registered under id '" + std::string(id) + "'");
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(by_id_.size());
    for (const auto& [id, _] : by_id_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::string, BuilderFactory, std::less<>> by_id_;
};

// Cached per-type pickler ids, indexed by Backend.
template <Picklable V>
const std::array<std::string, 2>& pickler_ids_for() {
  static const std::array<std::string, 2> ids = {
      make_pickler_id(Backend::generic, PickleTraits<V>::tag()),
      make_pickler_id(Backend::specialized, PickleTraits<V>::tag())};
  return ids;
}

namespace detail {

template <Picklable V>
class VectorBuilder final : public Builder {
 public:
  void add(std::any v) override {
    V* ptr = std::any_cast<V>(&v);
    if (!ptr) raise(Errc::type_mismatch, "builder element type mismatch");
    items_.push_back(std::move(*ptr));
  }

  void add_encoded(std::string_view pickler_id, std::string_view bytes) override {
    Backend b = backend_of_pickler_id(pickler_id);
    if (pickler_id != pickler_ids_for<V>()[static_cast<int>(b)])
      raise(Errc::type_mismatch, "emitted pickler '" + std::string(pickler_id) +
                                     "' does not match builder element type");
    ByteReader r(bytes);
    items_.push_back(PickleTraits<V>::decode(r, b));
    r.expect_end();
  }

  std::any finish() override {
    if (finished_) throw std::logic_error("builder finished twice");
    finished_ = true;
    return std::any(std::move(items_));
  }

  size_t count() const override { return items_.size(); }

 private:
  std::vector<V> items_;
  bool finished_ = false;
};

}  // namespace detail

template <Picklable V>
std::string vector_builder_id() {
  return "list[" + PickleTraits<V>::tag().canonical() + "]";
}

// The standard collection builder: gathers elements of V into std::vector<V>.
template <Picklable V>
BuilderFactory vector_builder_factory() {
  BuilderFactory f;
  f.id = vector_builder_id<V>();
  f.elem = PickleTraits<V>::tag();
  f.result = PickleTraits<std::vector<V>>::tag();
  f.make = [] { return std::make_unique<detail::VectorBuilder<V>>(); };
  return f;
}

}  // namespace scp
