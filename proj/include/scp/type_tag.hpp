#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace scp {

// A structural type descriptor with an injective canonical rendering,
// e.g. "Int64", "List[Person]", "Pair[Int32,List[Person]]".
class TypeTag {
 public:
  TypeTag() = default;
  explicit TypeTag(std::string name) : name_(std::move(name)) {}
  TypeTag(std::string name, std::vector<TypeTag> params)
      : name_(std::move(name)), params_(std::move(params)) {}

  const std::string& name() const { return name_; }
  const std::vector<TypeTag>& params() const { return params_; }

  std::string canonical() const {
    std::string out = name_;
    if (!params_.empty()) {
      out.push_back('[');
      for (size_t i = 0; i < params_.size(); ++i) {
        if (i) out.push_back(',');
        out += params_[i].canonical();
      }
      out.push_back(']');
    }
    return out;
  }

  friend bool operator==(const TypeTag& a, const TypeTag& b) {
    return a.name_ == b.name_ && a.params_ == b.params_;
  }
  friend bool operator!=(const TypeTag& a, const TypeTag& b) { return !(a == b); }

  // Parses a canonical rendering back into a structural tag.
  static TypeTag parse(std::string_view s) {
    size_t pos = 0;
    TypeTag t = parse_at(s, pos);
    if (pos != s.size()) raise(Errc::decode_failure, "trailing characters in type tag: " + std::string(s));
    return t;
  }

 private:
  static TypeTag parse_at(std::string_view s, size_t& pos) {
    size_t start = pos;
    while (pos < s.size() && s[pos] != '[' && s[pos] != ']' && s[pos] != ',') ++pos;
    if (pos == start) raise(Errc::decode_failure, "empty name in type tag: " + std::string(s));
    TypeTag t(std::string(s.substr(start, pos - start)));
    if (pos < s.size() && s[pos] == '[') {
      ++pos;
      while (true) {
        t.params_.push_back(parse_at(s, pos));
        if (pos >= s.size()) raise(Errc::decode_failure, "unterminated type tag: " + std::string(s));
        if (s[pos] == ',') {
          ++pos;
          continue;
        }
        if (s[pos] == ']') {
          ++pos;
          break;
        }
        raise(Errc::decode_failure, "malformed type tag: " + std::string(s));
      }
    }
    return t;
  }

  std::string name_;
  std::vector<TypeTag> params_;
};

namespace tags {
inline TypeTag boolean() { return TypeTag("Bool"); }
inline TypeTag int32() { return TypeTag("Int32"); }
inline TypeTag int64() { return TypeTag("Int64"); }
inline TypeTag float64() { return TypeTag("Float64"); }
inline TypeTag string() { return TypeTag("String"); }
inline TypeTag unit() { return TypeTag("Unit"); }
inline TypeTag list(TypeTag elem) { return TypeTag("List", {std::move(elem)}); }
inline TypeTag option(TypeTag t) { return TypeTag("Option", {std::move(t)}); }
inline TypeTag pair(TypeTag a, TypeTag b) { return TypeTag("Pair", {std::move(a), std::move(b)}); }
inline TypeTag tuple(std::vector<TypeTag> ts) { return TypeTag("Tuple", std::move(ts)); }
inline TypeTag map(TypeTag k, TypeTag v) { return TypeTag("Map", {std::move(k), std::move(v)}); }
inline TypeTag spore(TypeTag in, TypeTag out) { return TypeTag("Spore", {std::move(in), std::move(out)}); }
inline TypeTag emitter(TypeTag v) { return TypeTag("Emitter", {std::move(v)}); }
}  // namespace tags

}  // namespace scp
