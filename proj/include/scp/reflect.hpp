#pragma once

#include <string_view>
#include <tuple>
#include <type_traits>

namespace scp {

// Field descriptor produced by SCP_RECORD: a name plus a member pointer.
template <class T, class M>
struct FieldInfo {
  const char* name;
  M T::*member;
};

template <class T, class M>
constexpr FieldInfo<T, M> field_info(const char* name, M T::*member) {
  return {name, member};
}

// Specialized by SCP_RECORD for each user-defined record type.
template <class T>
struct RecordTraits {
  static constexpr bool is_record = false;
};

template <class T>
concept Record = RecordTraits<T>::is_record;

}  // namespace scp

// clang-format off
#define SCP_FIELD_1(T, f)       scp::field_info(#f, &T::f)
#define SCP_FIELD_2(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_1(T, __VA_ARGS__)
#define SCP_FIELD_3(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_2(T, __VA_ARGS__)
#define SCP_FIELD_4(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_3(T, __VA_ARGS__)
#define SCP_FIELD_5(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_4(T, __VA_ARGS__)
#define SCP_FIELD_6(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_5(T, __VA_ARGS__)
#define SCP_FIELD_7(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_6(T, __VA_ARGS__)
#define SCP_FIELD_8(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_7(T, __VA_ARGS__)
#define SCP_FIELD_9(T, f, ...)  SCP_FIELD_1(T, f), SCP_FIELD_8(T, __VA_ARGS__)
#define SCP_FIELD_10(T, f, ...) SCP_FIELD_1(T, f), SCP_FIELD_9(T, __VA_ARGS__)
#define SCP_FIELD_11(T, f, ...) SCP_FIELD_1(T, f), SCP_FIELD_10(T, __VA_ARGS__)
#define SCP_FIELD_12(T, f, ...) SCP_FIELD_1(T, f), SCP_FIELD_11(T, __VA_ARGS__)

#define SCP_NARG(...) SCP_NARG_(__VA_ARGS__, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1)
#define SCP_NARG_(_1, _2, _3, _4, _5, _6, _7, _8, _9, _10, _11, _12, N, ...) N
#define SCP_CONCAT(a, b) SCP_CONCAT_(a, b)
#define SCP_CONCAT_(a, b) a##b
#define SCP_FIELDS(T, ...) SCP_CONCAT(SCP_FIELD_, SCP_NARG(__VA_ARGS__))(T, __VA_ARGS__)
// clang-format on

// Declares pickling support for a plain struct. Must appear at global
// namespace scope after the struct definition:
//
//   struct Person { std::int64_t id; std::string name; std::int32_t age; };
//   SCP_RECORD(Person, id, name, age)
//
// Field order is the wire order.
#define SCP_RECORD(T, ...) SCP_RECORD_NAMED(T, #T, __VA_ARGS__)

// Variant for namespace-qualified types, so the wire-visible record name
// stays unqualified: SCP_RECORD_NAMED(demo::Person, "Person", id, name, age)
#define SCP_RECORD_NAMED(T, Name, ...)                                 \
  template <>                                                          \
  struct scp::RecordTraits<T> {                                        \
    static constexpr bool is_record = true;                            \
    static constexpr std::string_view name = Name;                     \
    static constexpr auto fields() { return std::make_tuple(SCP_FIELDS(T, __VA_ARGS__)); } \
  };
