#pragma once

#include <random>

#include <scp/scp.hpp>

// Shared fixtures: the registry every test cluster runs with, multiset
// comparison helpers and random data generators.

namespace scptest {

using namespace scp;

using I = int64_t;
using PII = std::pair<I, I>;
using Grouped = std::pair<I, std::vector<I>>;

// Bodies and picklers used across the runtime/combinator/acceptance tests.
// Must be called identically on every node of a cluster (the handshake
// enforces it).
inline void register_test_universe(Registry& reg) {
  reg.picklers().derive<std::vector<I>>();
  reg.picklers().derive<std::vector<PII>>();

  ensure_identity_body<std::vector<I>>(reg);
  ensure_identity_body<I>(reg);

  reg.bodies().add_unary<I, I>("t.addc", [](EnvView env, I x) { return x + env.get<I>(0); });
  reg.bodies().add_unary<I, I>("t.mulc", [](EnvView env, I x) { return x * env.get<I>(0); });
  reg.bodies().add_unary<I, I>("t.mod", [](EnvView env, I x) {
    I m = env.get<I>(0);
    return ((x % m) + m) % m;
  });
  reg.bodies().add_unary<I, I>("t.fail_on", [](EnvView env, I x) -> I {
    if (x == env.get<I>(0)) throw std::runtime_error("boom on " + std::to_string(x));
    return x;
  });
  reg.bodies().add_unary<I, PII>("t.key_mod", [](EnvView env, I x) {
    I m = env.get<I>(0);
    return std::make_pair(((x % m) + m) % m, x);
  });
  reg.bodies().add_unary<I, int32_t>("t.mod32", [](EnvView env, I x) {
    int32_t m = env.get<int32_t>(0);
    return static_cast<int32_t>(((x % m) + m) % m);
  });
  reg.bodies().add_unary<PII, I>("t.pair_sum",
                                 [](EnvView, const PII& p) { return p.first + p.second; });
  reg.bodies().add_unary<PII, PII>("t.pair_addc", [](EnvView env, const PII& p) {
    return std::make_pair(p.first, p.second + env.get<I>(0));
  });

  register_map_support<I, I>(reg);
  register_map_support<I, PII>(reg);
  register_map_support<PII, I>(reg);
  register_map_support<PII, PII>(reg);
  register_union_support<I>(reg);
  register_union_support<PII>(reg);
  register_group_by_support<I, I>(reg);
  register_join_support<I, I, I>(reg);

  // pump bodies beyond pass-through
  reg.bodies().add_pump<I, I>("t.emit_twice", [](EnvView, const I& x, Emitter& em) {
    em.emit(x);
    em.emit(x);
  });
  reg.bodies().add_pump<I, I>("t.emit_none", [](EnvView, const I&, Emitter&) {});
  reg.bodies().add_pump<I, I>("t.emit_fail_on", [](EnvView env, const I& x, Emitter& em) {
    if (x == env.get<I>(0)) throw std::runtime_error("pump boom");
    em.emit(x);
  });
}

inline std::shared_ptr<const Registry> test_registry() {
  auto reg = std::make_shared<Registry>();
  register_test_universe(*reg);
  return reg;
}

// Multiset equality via canonical byte sort.
template <Picklable T>
bool multiset_eq(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return false;
  std::vector<Bytes> ka, kb;
  ka.reserve(a.size());
  kb.reserve(b.size());
  for (const T& x : a) ka.push_back(canonical_bytes(x));
  for (const T& x : b) kb.push_back(canonical_bytes(x));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  return ka == kb;
}

// Grouped results compare with per-key value multisets.
template <Picklable K, Picklable V>
std::vector<std::pair<K, std::vector<V>>> normalize_grouped(std::vector<std::pair<K, std::vector<V>>> g) {
  for (auto& [k, vs] : g)
    std::sort(vs.begin(), vs.end(),
              [](const V& a, const V& b) { return canonical_bytes(a) < canonical_bytes(b); });
  std::sort(g.begin(), g.end(), [](const auto& a, const auto& b) {
    return canonical_bytes(a.first) < canonical_bytes(b.first);
  });
  return g;
}

template <Picklable K, Picklable V>
bool grouped_eq(std::vector<std::pair<K, std::vector<V>>> a,
                std::vector<std::pair<K, std::vector<V>>> b) {
  return normalize_grouped<K, V>(std::move(a)) == normalize_grouped<K, V>(std::move(b));
}

inline std::vector<I> random_ints(std::mt19937_64& rng, size_t max_len, I lo = -50, I hi = 50) {
  std::uniform_int_distribution<size_t> len(0, max_len);
  std::uniform_int_distribution<I> val(lo, hi);
  std::vector<I> out(len(rng));
  for (I& x : out) x = val(rng);
  return out;
}

inline std::vector<PII> random_pairs(std::mt19937_64& rng, size_t max_len, I key_span = 8) {
  std::uniform_int_distribution<size_t> len(0, max_len);
  std::uniform_int_distribution<I> key(0, key_span - 1);
  std::uniform_int_distribution<I> val(-100, 100);
  std::vector<PII> out(len(rng));
  for (PII& p : out) p = {key(rng), val(rng)};
  return out;
}

}  // namespace scptest
