#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "bytes.hpp"
#include "reflect.hpp"
#include "type_tag.hpp"

namespace scp {

// The two wire encodings under comparison.
//
// specialized: positional, no per-value metadata. Little-endian fixed-width
//              scalars, big-endian u32 length prefixes for strings/sequences.
//              This is what monomorphic generated serializers produce.
// generic:     self-describing. Every value carries a kind byte and its
//              canonical type name; records additionally carry field names.
//              Models a reflective serialization framework.
enum class Backend : uint8_t { generic = 0, specialized = 1 };

inline std::string_view to_string(Backend b) {
  return b == Backend::generic ? "generic" : "specialized";
}

struct Unit {
  friend bool operator==(Unit, Unit) { return true; }
};

namespace wirekind {
inline constexpr uint8_t boolean = 1;
inline constexpr uint8_t int32 = 2;
inline constexpr uint8_t int64 = 3;
inline constexpr uint8_t float64 = 4;
inline constexpr uint8_t string = 5;
inline constexpr uint8_t unit = 6;
inline constexpr uint8_t seq = 7;
inline constexpr uint8_t option = 8;
inline constexpr uint8_t tuple = 9;
inline constexpr uint8_t map = 10;
inline constexpr uint8_t record = 11;
inline constexpr uint8_t spore = 12;
}  // namespace wirekind

template <class T>
struct PickleTraits;  // specialized per supported type; unsupported types have no definition

template <class T>
concept Picklable = requires(ByteWriter& w, const T& v, ByteReader& r) {
  { PickleTraits<T>::tag() } -> std::convertible_to<TypeTag>;
  PickleTraits<T>::encode(w, v, Backend::specialized);
  { PickleTraits<T>::decode(r, Backend::specialized) } -> std::convertible_to<T>;
};

namespace detail {

inline void write_generic_head(ByteWriter& w, uint8_t kind, const TypeTag& tag) {
  w.u8(kind);
  w.str(tag.canonical());
}

// Reads and checks the self-description; a disagreeing type name is the
// generic backend's PicklerMismatch.
inline void read_generic_head(ByteReader& r, uint8_t kind, const TypeTag& tag) {
  uint8_t k = r.u8();
  if (k != kind)
    raise(k >= wirekind::boolean && k <= wirekind::spore ? Errc::pickler_mismatch
                                                         : Errc::decode_failure,
          "embedded kind does not match expected " + tag.canonical());
  std::string_view name = r.str();
  std::string expect = tag.canonical();
  if (name != expect)
    raise(Errc::pickler_mismatch,
          "embedded type '" + std::string(name) + "' does not match expected '" + expect + "'");
}

}  // namespace detail

template <>
struct PickleTraits<bool> {
  static TypeTag tag() { return tags::boolean(); }
  static void encode(ByteWriter& w, bool v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::boolean, tag());
    w.u8(v ? 1 : 0);
  }
  static bool decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::boolean, tag());
    uint8_t v = r.u8();
    if (v > 1) raise(Errc::decode_failure, "bad bool");
    return v == 1;
  }
};

template <>
struct PickleTraits<int32_t> {
  static TypeTag tag() { return tags::int32(); }
  static void encode(ByteWriter& w, int32_t v, Backend b) {
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::int32, tag());
      w.i32_be(v);
    } else {
      w.i32_le(v);
    }
  }
  static int32_t decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::int32, tag());
      return r.i32_be();
    }
    return r.i32_le();
  }
};

template <>
struct PickleTraits<int64_t> {
  static TypeTag tag() { return tags::int64(); }
  static void encode(ByteWriter& w, int64_t v, Backend b) {
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::int64, tag());
      w.i64_be(v);
    } else {
      w.i64_le(v);
    }
  }
  static int64_t decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::int64, tag());
      return r.i64_be();
    }
    return r.i64_le();
  }
};

template <>
struct PickleTraits<double> {
  static TypeTag tag() { return tags::float64(); }
  static void encode(ByteWriter& w, double v, Backend b) {
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::float64, tag());
      w.f64_be(v);
    } else {
      w.f64_le(v);
    }
  }
  static double decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::float64, tag());
      return r.f64_be();
    }
    return r.f64_le();
  }
};

template <>
struct PickleTraits<std::string> {
  static TypeTag tag() { return tags::string(); }
  static void encode(ByteWriter& w, const std::string& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::string, tag());
    w.str(v);
  }
  static std::string decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::string, tag());
    return std::string(r.str());
  }
};

template <>
struct PickleTraits<Unit> {
  static TypeTag tag() { return tags::unit(); }
  static void encode(ByteWriter& w, Unit, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::unit, tag());
  }
  static Unit decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::unit, tag());
    return Unit{};
  }
};

template <Picklable T>
struct PickleTraits<std::vector<T>> {
  static TypeTag tag() { return tags::list(PickleTraits<T>::tag()); }
  static void encode(ByteWriter& w, const std::vector<T>& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::seq, tag());
    w.u32_be(static_cast<uint32_t>(v.size()));
    for (const T& x : v) PickleTraits<T>::encode(w, x, b);
  }
  static std::vector<T> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::seq, tag());
    uint32_t n = r.u32_be();
    std::vector<T> out;
    out.reserve(std::min<size_t>(n, r.remaining() + 1));
    for (uint32_t i = 0; i < n; ++i) out.push_back(PickleTraits<T>::decode(r, b));
    return out;
  }
};

template <Picklable T>
struct PickleTraits<std::optional<T>> {
  static TypeTag tag() { return tags::option(PickleTraits<T>::tag()); }
  static void encode(ByteWriter& w, const std::optional<T>& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::option, tag());
    w.u8(v.has_value() ? 1 : 0);
    if (v) PickleTraits<T>::encode(w, *v, b);
  }
  static std::optional<T> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::option, tag());
    uint8_t has = r.u8();
    if (has > 1) raise(Errc::decode_failure, "bad optional flag");
    if (!has) return std::nullopt;
    return PickleTraits<T>::decode(r, b);
  }
};

template <Picklable A, Picklable B>
struct PickleTraits<std::pair<A, B>> {
  static TypeTag tag() { return tags::pair(PickleTraits<A>::tag(), PickleTraits<B>::tag()); }
  static void encode(ByteWriter& w, const std::pair<A, B>& v, Backend b) {
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::tuple, tag());
      w.u32_be(2);
    }
    PickleTraits<A>::encode(w, v.first, b);
    PickleTraits<B>::encode(w, v.second, b);
  }
  static std::pair<A, B> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::tuple, tag());
      if (r.u32_be() != 2) raise(Errc::decode_failure, "bad pair arity");
    }
    A a = PickleTraits<A>::decode(r, b);
    B bb = PickleTraits<B>::decode(r, b);
    return {std::move(a), std::move(bb)};
  }
};

template <Picklable... Ts>
struct PickleTraits<std::tuple<Ts...>> {
  static TypeTag tag() { return tags::tuple({PickleTraits<Ts>::tag()...}); }
  static void encode(ByteWriter& w, const std::tuple<Ts...>& v, Backend b) {
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::tuple, tag());
      w.u32_be(static_cast<uint32_t>(sizeof...(Ts)));
    }
    std::apply([&](const Ts&... xs) { (PickleTraits<Ts>::encode(w, xs, b), ...); }, v);
  }
  static std::tuple<Ts...> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::tuple, tag());
      if (r.u32_be() != sizeof...(Ts)) raise(Errc::decode_failure, "bad tuple arity");
    }
    return decode_items(r, b, std::index_sequence_for<Ts...>{});
  }

 private:
  template <size_t... Is>
  static std::tuple<Ts...> decode_items(ByteReader& r, Backend b, std::index_sequence<Is...>) {
    std::tuple<Ts...> out;
    ((std::get<Is>(out) = PickleTraits<Ts>::decode(r, b)), ...);
    return out;
  }
};

template <Picklable K, Picklable V>
struct PickleTraits<std::map<K, V>> {
  static TypeTag tag() { return tags::map(PickleTraits<K>::tag(), PickleTraits<V>::tag()); }
  static void encode(ByteWriter& w, const std::map<K, V>& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::map, tag());
    w.u32_be(static_cast<uint32_t>(v.size()));
    for (const auto& [k, x] : v) {
      PickleTraits<K>::encode(w, k, b);
      PickleTraits<V>::encode(w, x, b);
    }
  }
  static std::map<K, V> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::map, tag());
    uint32_t n = r.u32_be();
    std::map<K, V> out;
    for (uint32_t i = 0; i < n; ++i) {
      K k = PickleTraits<K>::decode(r, b);
      V x = PickleTraits<V>::decode(r, b);
      out.emplace(std::move(k), std::move(x));
    }
    return out;
  }
};

// Records declared with SCP_RECORD. Specialized layout is the bare field
// sequence; generic layout carries the record name and every field name.
template <Record T>
struct PickleTraits<T> {
  static TypeTag tag() { return TypeTag(std::string(RecordTraits<T>::name)); }

  static void encode(ByteWriter& w, const T& v, Backend b) {
    constexpr auto fields = RecordTraits<T>::fields();
    if (b == Backend::generic) {
      detail::write_generic_head(w, wirekind::record, tag());
      w.u32_be(static_cast<uint32_t>(std::tuple_size_v<decltype(fields)>));
      std::apply(
          [&](const auto&... f) {
            ((w.str(f.name),
              PickleTraits<std::decay_t<decltype(v.*(f.member))>>::encode(w, v.*(f.member), b)),
             ...);
          },
          fields);
    } else {
      std::apply(
          [&](const auto&... f) {
            (PickleTraits<std::decay_t<decltype(v.*(f.member))>>::encode(w, v.*(f.member), b), ...);
          },
          fields);
    }
  }

  static T decode(ByteReader& r, Backend b) {
    constexpr auto fields = RecordTraits<T>::fields();
    T out{};
    if (b == Backend::generic) {
      detail::read_generic_head(r, wirekind::record, tag());
      if (r.u32_be() != std::tuple_size_v<decltype(fields)>)
        raise(Errc::decode_failure, "bad field count for " + std::string(RecordTraits<T>::name));
      std::apply(
          [&](const auto&... f) {
            (
                [&] {
                  std::string_view name = r.str();
                  if (name != f.name)
                    raise(Errc::pickler_mismatch, "field '" + std::string(name) +
                                                      "' does not match expected '" + f.name + "'");
                  out.*(f.member) =
                      PickleTraits<std::decay_t<decltype(out.*(f.member))>>::decode(r, b);
                }(),
                ...);
          },
          fields);
    } else {
      std::apply(
          [&](const auto&... f) {
            ((out.*(f.member) =
                  PickleTraits<std::decay_t<decltype(out.*(f.member))>>::decode(r, b)),
             ...);
          },
          fields);
    }
    return out;
  }
};

template <Picklable T>
Bytes pickle(const T& v, Backend b) {
  ByteWriter w;
  PickleTraits<T>::encode(w, v, b);
  return w.take();
}

template <Picklable T>
T unpickle(std::string_view bytes, Backend b) {
  ByteReader r(bytes);
  T out = PickleTraits<T>::decode(r, b);
  r.expect_end();
  return out;
}

template <Picklable T>
TypeTag tag_of() {
  return PickleTraits<T>::tag();
}

// Canonical byte form of a value: the specialized encoding. Gives any
// picklable type a total order and a stable hash, used by partitioners,
// sort keys and multiset comparisons.
template <Picklable T>
Bytes canonical_bytes(const T& v) {
  return pickle(v, Backend::specialized);
}

}  // namespace scp
