#pragma once

#include <any>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "builder.hpp"
#include "emitter.hpp"
#include "pickler_registry.hpp"

namespace scp {

class Registry;

// A restricted closure that can cross the network: a registry-resolved body
// id plus an explicitly declared, eagerly encoded environment. Bodies are
// never shipped; both ends resolve body_id against identical registries.
struct SporeEnvEntry {
  std::string name;
  std::string pickler_id;
  Bytes value;

  friend bool operator==(const SporeEnvEntry&, const SporeEnvEntry&) = default;
};

struct Spore {
  std::string body_id;
  std::vector<SporeEnvEntry> env;
  std::vector<TypeTag> captured;  // one tag per env entry, declaration order
  TypeTag input;
  TypeTag output;
  std::vector<TypeTag> excluded;  // reserved; always empty

  friend bool operator==(const Spore&, const Spore&) = default;
};

inline void write_spore(ByteWriter& w, const Spore& s) {
  w.str(s.body_id);
  w.u32_be(static_cast<uint32_t>(s.env.size()));
  for (const SporeEnvEntry& e : s.env) {
    w.str(e.name);
    w.str(e.pickler_id);
    w.str(e.value);
  }
  w.u32_be(static_cast<uint32_t>(s.captured.size()));
  for (const TypeTag& t : s.captured) w.str(t.canonical());
  w.str(s.input.canonical());
  w.str(s.output.canonical());
}

inline Spore read_spore(ByteReader& r) {
  Spore s;
  s.body_id = std::string(r.str());
  uint32_t envn = r.u32_be();
  s.env.reserve(envn);
  for (uint32_t i = 0; i < envn; ++i) {
    SporeEnvEntry e;
    e.name = std::string(r.str());
    e.pickler_id = std::string(r.str());
    e.value = Bytes(r.str());
    s.env.push_back(std::move(e));
  }
  uint32_t capn = r.u32_be();
  if (capn != envn) raise(Errc::decode_failure, "captured descriptor does not match env length");
  s.captured.reserve(capn);
  for (uint32_t i = 0; i < capn; ++i) s.captured.push_back(TypeTag::parse(r.str()));
  s.input = TypeTag::parse(r.str());
  s.output = TypeTag::parse(r.str());
  return s;
}

inline Bytes pickle_spore(const Spore& s) {
  ByteWriter w;
  write_spore(w, s);
  return w.take();
}

inline Spore unpickle_spore(std::string_view bytes) {
  ByteReader r(bytes);
  Spore s = read_spore(r);
  r.expect_end();
  return s;
}

// The decoded environment a body sees, plus a handle back to the registry
// so bodies can evaluate captured spores.
class EnvView {
 public:
  EnvView(const Registry* reg, std::span<const std::any> values) : reg_(reg), values_(values) {}

  size_t size() const { return values_.size(); }

  template <class T>
  const T& get(size_t i) const {
    if (i >= values_.size()) raise(Errc::type_mismatch, "capture index out of range");
    const T* p = std::any_cast<T>(&values_[i]);
    if (!p) raise(Errc::type_mismatch, "capture has unexpected type");
    return *p;
  }

  const Registry& registry() const { return *reg_; }

 private:
  const Registry* reg_;
  std::span<const std::any> values_;
};

using UnaryBodyFn =
    std::function<std::any(const Registry&, std::span<const std::any>, const std::any&)>;
using PumpBodyFn =
    std::function<void(const Registry&, std::span<const std::any>, const std::any&, Emitter&)>;

struct BodyEntry {
  std::string id;
  TypeTag arg;
  TypeTag result;
  bool is_pump = false;
  UnaryBodyFn unary;
  PumpBodyFn pump;
};

// Execution plan for a body id. Composition produces structural ids of the
// form then(<id>@<env-prefix-length>,<id>); resolving one splices the two
// plans back together with the environment split point.
class ResolvedBody {
 public:
  static std::shared_ptr<const ResolvedBody> leaf(const BodyEntry* e) {
    auto b = std::make_shared<ResolvedBody>();
    b->leaf_ = e;
    b->arg_ = e->arg;
    b->result_ = e->result;
    return b;
  }

  static std::shared_ptr<const ResolvedBody> chain(std::shared_ptr<const ResolvedBody> first,
                                                   size_t first_env,
                                                   std::shared_ptr<const ResolvedBody> second) {
    if (first->is_pump() || second->is_pump())
      raise(Errc::type_mismatch, "pump bodies do not compose");
    if (first->result() != second->arg())
      raise(Errc::type_mismatch, "composed body types do not line up: " +
                                     first->result().canonical() + " vs " +
                                     second->arg().canonical());
    auto b = std::make_shared<ResolvedBody>();
    b->first_ = std::move(first);
    b->second_ = std::move(second);
    b->first_env_ = first_env;
    b->arg_ = b->first_->arg();
    b->result_ = b->second_->result();
    return b;
  }

  bool is_pump() const { return leaf_ && leaf_->is_pump; }
  const TypeTag& arg() const { return arg_; }
  const TypeTag& result() const { return result_; }

  std::any run_unary(const Registry& reg, std::span<const std::any> env, const std::any& x) const {
    if (leaf_) {
      if (leaf_->is_pump) raise(Errc::type_mismatch, "pump body evaluated as a function");
      return leaf_->unary(reg, env, x);
    }
    if (env.size() < first_env_) raise(Errc::type_mismatch, "composed env too short");
    std::any mid = first_->run_unary(reg, env.first(first_env_), x);
    return second_->run_unary(reg, env.subspan(first_env_), mid);
  }

  void run_pump(const Registry& reg, std::span<const std::any> env, const std::any& collection,
                Emitter& out) const {
    if (!leaf_ || !leaf_->is_pump) raise(Errc::type_mismatch, "body is not a pump body");
    leaf_->pump(reg, env, collection, out);
  }

 private:
  const BodyEntry* leaf_ = nullptr;
  std::shared_ptr<const ResolvedBody> first_, second_;
  size_t first_env_ = 0;
  TypeTag arg_, result_;
};

class BodyRegistry {
 public:
  // The dynamic registration path: an erased function under an explicit
  // argument/result contract.
  void add(std::string id, TypeTag arg, TypeTag result, UnaryBodyFn fn) {
    validate_id(id);
    BodyEntry e;
    e.id = id;
    e.arg = std::move(arg);
    e.result = std::move(result);
    e.unary = std::move(fn);
    insert(std::move(e));
  }

  template <class A, class B, class F>
  void add_unary(std::string id, F f) {
    add(std::move(id), tag_of<A>(), tag_of<B>(),
        [f = std::move(f)](const Registry& reg, std::span<const std::any> env,
                           const std::any& x) -> std::any {
          const A* a = std::any_cast<A>(&x);
          if (!a) raise(Errc::type_mismatch, "body argument has unexpected type");
          return std::any(f(EnvView(&reg, env), *a));
        });
  }

  // Pump bodies take (element, emitter) pairs; the registered callable is
  // invoked once per element of the source collection.
  template <class U, class V, class F>
  void add_pump(std::string id, F f) {
    validate_id(id);
    BodyEntry e;
    e.id = id;
    e.arg = tags::pair(tag_of<U>(), tags::emitter(tag_of<V>()));
    e.result = tags::unit();
    e.is_pump = true;
    e.pump = [f = std::move(f)](const Registry& reg, std::span<const std::any> env,
                                const std::any& collection, Emitter& out) {
      const std::vector<U>* xs = std::any_cast<std::vector<U>>(&collection);
      if (!xs) raise(Errc::type_mismatch, "pump source has unexpected element type");
      EnvView ev(&reg, env);
      for (const U& u : *xs) f(ev, u, out);
    };
    insert(std::move(e));
  }

  bool contains(std::string_view id) const { return entries_.count(std::string(id)) > 0; }

  const BodyEntry& entry(std::string_view id) const {
    auto it = entries_.find(std::string(id));
    if (it == entries_.end())
      raise(Errc::unknown_body_id, "no body registered under id '" + std::string(id) + "'");
    return it->second;
  }

  std::shared_ptr<const ResolvedBody> resolve(std::string_view id) const {
    if (id.substr(0, 5) == "then(") {
      if (id.back() != ')') raise(Errc::unknown_body_id, "malformed composed body id");
      std::string_view inner = id.substr(5, id.size() - 6);
      size_t depth = 0;
      size_t at = std::string_view::npos;
      for (size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == '@' && depth == 0) {
          at = i;
          break;
        }
      }
      if (at == std::string_view::npos) raise(Errc::unknown_body_id, "malformed composed body id");
      size_t comma = inner.find(',', at);
      if (comma == std::string_view::npos) raise(Errc::unknown_body_id, "malformed composed body id");
      size_t n = 0;
      for (char c : inner.substr(at + 1, comma - at - 1)) {
        if (c < '0' || c > '9') raise(Errc::unknown_body_id, "malformed composed body id");
        n = n * 10 + static_cast<size_t>(c - '0');
      }
      return ResolvedBody::chain(resolve(inner.substr(0, at)), n,
                                 resolve(inner.substr(comma + 1)));
    }
    return ResolvedBody::leaf(&entry(id));
  }

  std::vector<std::string> fingerprint_lines() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_)
      out.push_back("b|" + id + "|" + e.arg.canonical() + "|" + e.result.canonical() +
                    (e.is_pump ? "|p" : "|u"));
    return out;
  }

 private:
  void validate_id(const std::string& id) {
    if (id.empty() || id.find('@') != std::string::npos || id.substr(0, 5) == "then(")
      throw std::invalid_argument("invalid body id '" + id + "'");
  }

  void insert(BodyEntry e) {
    auto [it, inserted] = entries_.emplace(e.id, std::move(e));
    if (!inserted) raise(Errc::duplicate_body_id, "body id '" + it->first + "' already registered");
  }

  std::unordered_map<std::string, BodyEntry> entries_;
};

// One registry instance per node; contents must be identical cluster-wide,
// which the handshake enforces by comparing fingerprints.
class Registry {
 public:
  BodyRegistry& bodies() { return bodies_; }
  const BodyRegistry& bodies() const { return bodies_; }
  PicklerRegistry& picklers() { return picklers_; }
  const PicklerRegistry& picklers() const { return picklers_; }
  BuilderRegistry& builders() { return builders_; }
  const BuilderRegistry& builders() const { return builders_; }

  uint64_t fingerprint() const {
    std::vector<std::string> lines = bodies_.fingerprint_lines();
    for (std::string& id : picklers_.ids()) lines.push_back("p|" + id);
    for (std::string& id : builders_.ids()) lines.push_back("k|" + id);
    std::sort(lines.begin(), lines.end());
    uint64_t h = 14695981039346656037ull;
    for (const std::string& l : lines) {
      h = fnv1a64(l, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

 private:
  BodyRegistry bodies_;
  PicklerRegistry picklers_;
  BuilderRegistry builders_;
};

inline std::vector<std::any> decode_spore_env(const Registry& reg, const Spore& s) {
  std::vector<std::any> env;
  env.reserve(s.env.size());
  for (const SporeEnvEntry& e : s.env) {
    const ErasedPickler& pk = reg.picklers().by_id(e.pickler_id);
    ByteReader r(e.value);
    env.push_back(pk.decode(r));
    r.expect_end();
  }
  return env;
}

// Applies a spore to a value: decodes the environment with the recorded
// picklers, then runs the resolved body. Equivalent to evaluating the
// closure the spore was built from.
inline std::any eval_spore(const Registry& reg, const Spore& s, const std::any& x) {
  std::shared_ptr<const ResolvedBody> body = reg.bodies().resolve(s.body_id);
  std::vector<std::any> env = decode_spore_env(reg, s);
  return body->run_unary(reg, env, x);
}

inline void eval_pump_spore(const Registry& reg, const Spore& s, const std::any& collection,
                            Emitter& out) {
  std::shared_ptr<const ResolvedBody> body = reg.bodies().resolve(s.body_id);
  std::vector<std::any> env = decode_spore_env(reg, s);
  body->run_pump(reg, env, collection, out);
}

// s1 after s2. The result's env and captured descriptor are the
// concatenation s2 ++ s1 (argument-flow order); when s2 captures nothing the
// descriptor degenerates to s1's.
inline Spore compose_spores(const Spore& s1, const Spore& s2) {
  if (s2.output != s1.input)
    raise(Errc::type_mismatch, "cannot compose: " + s2.output.canonical() +
                                   " does not match " + s1.input.canonical());
  Spore out;
  out.body_id = "then(" + s2.body_id + "@" + std::to_string(s2.env.size()) + "," + s1.body_id + ")";
  out.env = s2.env;
  out.env.insert(out.env.end(), s1.env.begin(), s1.env.end());
  out.captured = s2.captured;
  out.captured.insert(out.captured.end(), s1.captured.begin(), s1.captured.end());
  out.input = s2.input;
  out.output = s1.output;
  return out;
}

// A named capture for a spore header. Construction of the header is the
// only place values may be captured.
template <class T>
struct NamedCapture {
  std::string name;
  T value;
};

template <class T>
NamedCapture<std::decay_t<T>> cap(std::string name, T&& value) {
  static_assert(Picklable<std::decay_t<T>>,
                "spore captures must be picklable: declare the type with SCP_RECORD "
                "or use a supported primitive/collection");
  return {std::move(name), std::forward<T>(value)};
}

namespace detail {

template <Picklable C>
void append_capture(const Registry& reg, Spore& s, NamedCapture<C>&& c) {
  const TypeTag tag = PickleTraits<C>::tag();
  const std::string pickler_id = make_pickler_id(Backend::specialized, tag);
  if (!reg.picklers().contains(pickler_id))
    raise(Errc::unencodable_capture,
          "capture '" + c.name + "' of type " + tag.canonical() + " has no registered pickler");
  ByteWriter w;
  PickleTraits<C>::encode(w, c.value, Backend::specialized);
  s.env.push_back(SporeEnvEntry{std::move(c.name), pickler_id, w.take()});
  s.captured.push_back(tag);
}

template <Picklable... Cs>
Spore make_spore_checked(const Registry& reg, const std::string& body_id, const TypeTag& arg,
                         const TypeTag& result, bool want_pump, NamedCapture<Cs>&&... caps) {
  const BodyEntry& entry = reg.bodies().entry(body_id);
  if (entry.is_pump != want_pump)
    raise(Errc::type_mismatch, "body '" + body_id + "' has the wrong evaluation shape");
  if (entry.arg != arg || entry.result != result)
    raise(Errc::type_mismatch, "body '" + body_id + "' has type " + entry.arg.canonical() +
                                   " -> " + entry.result.canonical() + ", expected " +
                                   arg.canonical() + " -> " + result.canonical());
  Spore s;
  s.body_id = body_id;
  s.input = arg;
  s.output = result;
  (append_capture(reg, s, std::move(caps)), ...);
  return s;
}

}  // namespace detail

template <class A, class B>
class BoundSpore;

// Typed handle over a wire-format spore with input A and output B.
template <class A, class B>
class SporeFn {
 public:
  SporeFn() = default;
  explicit SporeFn(Spore s) : spore_(std::move(s)) {}

  const Spore& spore() const& { return spore_; }
  Spore spore() && { return std::move(spore_); }

  B eval(const Registry& reg, const A& x) const {
    std::any out = eval_spore(reg, spore_, std::any(x));
    B* b = std::any_cast<B>(&out);
    if (!b) raise(Errc::type_mismatch, "spore produced unexpected result type");
    return std::move(*b);
  }

  // Resolves the body and decodes the env once; the returned callable is
  // cheap to invoke per element.
  BoundSpore<A, B> bind(const Registry& reg) const;

  friend bool operator==(const SporeFn& a, const SporeFn& b) { return a.spore_ == b.spore_; }

 private:
  Spore spore_;
};

template <class A, class B>
class BoundSpore {
 public:
  BoundSpore(const Registry* reg, std::shared_ptr<const ResolvedBody> body,
             std::shared_ptr<const std::vector<std::any>> env)
      : reg_(reg), body_(std::move(body)), env_(std::move(env)) {}

  B operator()(const A& x) const {
    std::any out = body_->run_unary(*reg_, std::span(env_->data(), env_->size()), std::any(x));
    B* b = std::any_cast<B>(&out);
    if (!b) raise(Errc::type_mismatch, "spore produced unexpected result type");
    return std::move(*b);
  }

 private:
  const Registry* reg_;
  std::shared_ptr<const ResolvedBody> body_;
  std::shared_ptr<const std::vector<std::any>> env_;
};

template <class A, class B>
BoundSpore<A, B> SporeFn<A, B>::bind(const Registry& reg) const {
  return BoundSpore<A, B>(&reg, reg.bodies().resolve(spore_.body_id),
                          std::make_shared<const std::vector<std::any>>(decode_spore_env(reg, spore_)));
}

// Typed handle over a pump spore: invoked per element of type U, emitting
// values of type V.
template <class U, class V>
class PumpFn {
 public:
  PumpFn() = default;
  explicit PumpFn(Spore s) : spore_(std::move(s)) {}
  const Spore& spore() const& { return spore_; }

  friend bool operator==(const PumpFn& a, const PumpFn& b) { return a.spore_ == b.spore_; }

 private:
  Spore spore_;
};

// Builds a spore over a registered unary body. Capture types are checked
// statically (Picklable) and their picklers must be registered, so a spore
// that constructs successfully always decodes remotely.
template <class A, class B, Picklable... Cs>
SporeFn<A, B> make_spore(const Registry& reg, const std::string& body_id, NamedCapture<Cs>... caps) {
  return SporeFn<A, B>(detail::make_spore_checked(reg, body_id, tag_of<A>(), tag_of<B>(), false,
                                                  std::move(caps)...));
}

template <class U, class V, Picklable... Cs>
PumpFn<U, V> make_pump_spore(const Registry& reg, const std::string& body_id,
                             NamedCapture<Cs>... caps) {
  TypeTag arg = tags::pair(tag_of<U>(), tags::emitter(tag_of<V>()));
  return PumpFn<U, V>(
      detail::make_spore_checked(reg, body_id, arg, tags::unit(), true, std::move(caps)...));
}

template <class A, class B, class C>
SporeFn<A, C> compose(const SporeFn<B, C>& s1, const SporeFn<A, B>& s2) {
  return SporeFn<A, C>(compose_spores(s1.spore(), s2.spore()));
}

// The dynamic construction path, for callers without static types in hand.
struct DynCapture {
  std::string name;
  std::any value;
};

inline Spore make_spore_dynamic(const Registry& reg, const std::string& body_id,
                                std::vector<DynCapture> caps) {
  const BodyEntry& entry = reg.bodies().entry(body_id);
  Spore s;
  s.body_id = body_id;
  s.input = entry.arg;
  s.output = entry.result;
  for (DynCapture& c : caps) {
    const ErasedPickler* pk =
        reg.picklers().for_type(std::type_index(c.value.type()), Backend::specialized);
    if (!pk)
      raise(Errc::unencodable_capture,
            "capture '" + c.name + "' has no registered pickler for its runtime type");
    ByteWriter w;
    pk->encode(w, c.value);
    s.env.push_back(SporeEnvEntry{std::move(c.name), pk->id, w.take()});
    s.captured.push_back(pk->type);
  }
  return s;
}

template <Picklable A, Picklable B>
struct PickleTraits<SporeFn<A, B>> {
  static TypeTag tag() { return tags::spore(tag_of<A>(), tag_of<B>()); }
  static void encode(ByteWriter& w, const SporeFn<A, B>& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::spore, tag());
    write_spore(w, v.spore());
  }
  static SporeFn<A, B> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::spore, tag());
    Spore s = read_spore(r);
    if (s.input != tag_of<A>() || s.output != tag_of<B>())
      raise(Errc::type_mismatch, "decoded spore has type " + s.input.canonical() + " -> " +
                                     s.output.canonical());
    return SporeFn<A, B>(std::move(s));
  }
};

template <Picklable U, Picklable V>
struct PickleTraits<PumpFn<U, V>> {
  static TypeTag tag() {
    return tags::spore(tags::pair(tag_of<U>(), tags::emitter(tag_of<V>())), tags::unit());
  }
  static void encode(ByteWriter& w, const PumpFn<U, V>& v, Backend b) {
    if (b == Backend::generic) detail::write_generic_head(w, wirekind::spore, tag());
    write_spore(w, v.spore());
  }
  static PumpFn<U, V> decode(ByteReader& r, Backend b) {
    if (b == Backend::generic) detail::read_generic_head(r, wirekind::spore, tag());
    Spore s = read_spore(r);
    if (s.input != tags::pair(tag_of<U>(), tags::emitter(tag_of<V>())) || s.output != tags::unit())
      raise(Errc::type_mismatch, "decoded pump spore has unexpected element type");
    return PumpFn<U, V>(std::move(s));
  }
};

template <Picklable T>
std::string identity_body_id() {
  return "scp.id[" + PickleTraits<T>::tag().canonical() + "]";
}

template <Picklable T>
void ensure_identity_body(Registry& reg) {
  std::string id = identity_body_id<T>();
  if (!reg.bodies().contains(id))
    reg.bodies().add_unary<T, T>(id, [](EnvView, const T& x) { return x; });
  reg.picklers().derive<T>();
}

template <Picklable T>
SporeFn<T, T> identity_spore(const Registry& reg) {
  return make_spore<T, T>(reg, identity_body_id<T>());
}

}  // namespace scp
