#pragma once

#include <any>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <typeindex>
#include <unordered_map>
#include <vector>

#include "pickle.hpp"

namespace scp {

inline std::string make_pickler_id(Backend b, const TypeTag& tag) {
  return (b == Backend::specialized ? "s!" : "g!") + tag.canonical();
}

inline Backend backend_of_pickler_id(std::string_view id) {
  if (id.size() >= 2 && id[1] == '!') {
    if (id[0] == 's') return Backend::specialized;
    if (id[0] == 'g') return Backend::generic;
  }
  raise(Errc::unknown_pickler, "malformed pickler id '" + std::string(id) + "'");
}

// A pickler with the value type erased, so nodes can decode spore captures
// and silo payloads identified only by a pickler id string.
struct ErasedPickler {
  std::string id;
  TypeTag type;
  Backend backend;
  std::function<void(ByteWriter&, const std::any&)> encode;
  std::function<std::any(ByteReader&)> decode;
};

namespace detail {

// Recursively registers the component types of T (the schema closure).
template <class T>
struct SchemaClosure {
  template <class Reg>
  static void apply(Reg&) {}
};

}  // namespace detail

// Write-once at startup, read-only afterwards; concurrent reads need no
// coordination.
class PicklerRegistry {
 public:
  // Registers the generic and specialized picklers for T if absent.
  template <Picklable T>
  void ensure() {
    ensure_one<T>(Backend::generic);
    ensure_one<T>(Backend::specialized);
  }

  // Registers picklers for T and every type in its schema closure, both
  // backends per type.
  template <Picklable T>
  void derive() {
    ensure<T>();
    detail::SchemaClosure<T>::apply(*this);
  }

  bool contains(std::string_view id) const { return by_id_.count(std::string(id)) > 0; }

  const ErasedPickler* maybe_by_id(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &it->second;
  }

  const ErasedPickler& by_id(std::string_view id) const {
    if (const ErasedPickler* p = maybe_by_id(id)) return *p;
    raise(Errc::unknown_pickler, "no pickler registered under id '" + std::string(id) + "'");
  }

  const ErasedPickler* for_type(std::type_index ti, Backend b) const {
    auto it = by_type_.find({ti, b});
    return it == by_type_.end() ? nullptr : maybe_by_id(it->second);
  }

  const ErasedPickler* for_tag(const TypeTag& tag, Backend b) const {
    return maybe_by_id(make_pickler_id(b, tag));
  }

  // Dynamic lookup used by the runtime when only a TypeTag is known. The
  // static path registers everything up front; this raises UnsupportedType
  // for tags outside the supported universe or never instantiated.
  const ErasedPickler& derive_for_tag(const TypeTag& tag, Backend b) const {
    if (const ErasedPickler* p = for_tag(tag, b)) return *p;
    check_supported(tag);
    raise(Errc::unsupported_type,
          "type " + tag.canonical() + " was never instantiated in this build's schema");
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(by_id_.size());
    for (const auto& [id, _] : by_id_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

  size_t size() const { return by_id_.size(); }

 private:
  template <Picklable T>
  void ensure_one(Backend b) {
    TypeTag tag = PickleTraits<T>::tag();
    std::string id = make_pickler_id(b, tag);
    if (by_id_.count(id)) return;
    ErasedPickler p;
    p.id = id;
    p.type = tag;
    p.backend = b;
    p.encode = [b](ByteWriter& w, const std::any& v) {
      const T* ptr = std::any_cast<T>(&v);
      if (!ptr) raise(Errc::type_mismatch, "value does not hold expected pickler type");
      PickleTraits<T>::encode(w, *ptr, b);
    };
    p.decode = [b](ByteReader& r) -> std::any { return PickleTraits<T>::decode(r, b); };
    by_id_.emplace(id, std::move(p));
    by_type_[{std::type_index(typeid(T)), b}] = id;
  }

  void check_supported(const TypeTag& tag) const {
    static const std::set<std::string, std::less<>> heads = {
        "Bool", "Int32", "Int64", "Float64", "String", "Unit",
        "List", "Option", "Pair",  "Tuple",  "Map",    "Spore", "Emitter"};
    bool structural = heads.count(tag.name()) > 0;
    bool known_record = tag.params().empty() && record_names_.count(tag.name()) > 0;
    if (!structural && !known_record)
      raise(Errc::unsupported_type, "type " + tag.canonical() + " is outside the supported universe");
    for (const TypeTag& p : tag.params()) check_supported(p);
  }

  friend struct RecordNameHook;
  template <class T>
  friend struct detail::SchemaClosure;

  void note_record_name(std::string name) { record_names_.insert(std::move(name)); }

  std::unordered_map<std::string, ErasedPickler> by_id_;
  std::map<std::pair<std::type_index, Backend>, std::string> by_type_;
  std::set<std::string, std::less<>> record_names_;
};

namespace detail {

template <Picklable T>
struct SchemaClosure<std::vector<T>> {
  static void apply(PicklerRegistry& r) { r.derive<T>(); }
};
template <Picklable T>
struct SchemaClosure<std::optional<T>> {
  static void apply(PicklerRegistry& r) { r.derive<T>(); }
};
template <Picklable A, Picklable B>
struct SchemaClosure<std::pair<A, B>> {
  static void apply(PicklerRegistry& r) {
    r.derive<A>();
    r.derive<B>();
  }
};
template <Picklable... Ts>
struct SchemaClosure<std::tuple<Ts...>> {
  static void apply(PicklerRegistry& r) { (r.derive<Ts>(), ...); }
};
template <Picklable K, Picklable V>
struct SchemaClosure<std::map<K, V>> {
  static void apply(PicklerRegistry& r) {
    r.derive<K>();
    r.derive<V>();
  }
};
template <Record T>
struct SchemaClosure<T> {
  static void apply(PicklerRegistry& r) {
    r.note_record_name(std::string(RecordTraits<T>::name));
    std::apply(
        [&](const auto&... f) {
          (r.derive<std::decay_t<decltype(std::declval<T>().*(f.member))>>(), ...);
        },
        RecordTraits<T>::fields());
  }
};

}  // namespace detail

}  // namespace scp
