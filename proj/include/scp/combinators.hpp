#pragma once

#include <algorithm>

#include "silo.hpp"

namespace scp {

// Derived operations built from apply and pump_to alone. Each combinator has
// a register_*_support function that installs its body ids, picklers and
// builders; call the same set on every node before starting the cluster.

// ---- map ----

template <Picklable A, Picklable B>
std::string map_body_id() {
  return "scp.map[" + tag_of<A>().canonical() + "," + tag_of<B>().canonical() + "]";
}

template <Picklable A, Picklable B>
void register_map_support(Registry& reg) {
  reg.picklers().derive<std::vector<A>>();
  reg.picklers().derive<std::vector<B>>();
  reg.picklers().ensure<SporeFn<A, B>>();
  std::string id = map_body_id<A, B>();
  if (reg.bodies().contains(id)) return;
  reg.bodies().add_unary<std::vector<A>, std::vector<B>>(
      id, [](EnvView env, const std::vector<A>& xs) {
        auto f = env.get<SporeFn<A, B>>(0).bind(env.registry());
        std::vector<B> out;
        out.reserve(xs.size());
        for (const A& x : xs) out.push_back(f(x));
        return out;
      });
}

// map as one apply whose spore is "the map implementation composed with the
// user function": the user spore rides in the header.
template <Picklable A, Picklable B>
SiloRef<std::vector<B>> map_silo(const SiloRef<std::vector<A>>& ref, const SporeFn<A, B>& user_fn) {
  auto s = make_spore<std::vector<A>, std::vector<B>>(ref.runtime().registry(),
                                                      map_body_id<A, B>(), cap("f", user_fn));
  return ref.apply(s);
}

// ---- pass-through emission (union and friends) ----

template <Picklable T>
std::string emit_body_id() {
  return "scp.emit[" + tag_of<T>().canonical() + "]";
}

template <Picklable T>
void register_union_support(Registry& reg) {
  reg.picklers().derive<std::vector<T>>();
  reg.builders().ensure(vector_builder_factory<T>());
  std::string id = emit_body_id<T>();
  if (reg.bodies().contains(id)) return;
  reg.bodies().add_pump<T, T>(id, [](EnvView, const T& x, Emitter& em) { em.emit(x); });
}

template <Picklable T>
PumpFn<T, T> passthrough_pump(const Registry& reg) {
  return make_pump_spore<T, T>(reg, emit_body_id<T>());
}

// Multiset sum of two silos, materialized at dest.
template <Picklable T>
SiloRef<std::vector<T>> union_silos(NodeRuntime& rt, const Place& dest,
                                    const SiloRef<std::vector<T>>& a,
                                    const SiloRef<std::vector<T>>& b) {
  return pump_to_vector<T, T>(rt, dest, a, b, passthrough_pump<T>(rt.registry()));
}

// ---- partitioning ----

// Total, stable mapping from keys to [0, num_partitions). The function is a
// spore so partition lineage can ship it.
template <Picklable K>
struct Partitioner {
  int32_t num_partitions = 0;
  SporeFn<K, int32_t> fn;
};

template <Picklable K>
std::string hash_partition_body_id() {
  return "scp.hashpart[" + tag_of<K>().canonical() + "]";
}

template <Picklable K>
void register_partitioner_support(Registry& reg) {
  reg.picklers().derive<K>();
  reg.picklers().ensure<int32_t>();
  reg.picklers().ensure<SporeFn<K, int32_t>>();
  std::string id = hash_partition_body_id<K>();
  if (reg.bodies().contains(id)) return;
  reg.bodies().add_unary<K, int32_t>(id, [](EnvView env, const K& k) {
    int32_t n = env.get<int32_t>(0);
    return static_cast<int32_t>(fnv1a64(canonical_bytes(k)) % static_cast<uint64_t>(n));
  });
}

// hash(key) mod N over the key's canonical encoding.
template <Picklable K>
Partitioner<K> hash_partitioner(const Registry& reg, int32_t num_partitions) {
  return Partitioner<K>{num_partitions, make_spore<K, int32_t>(reg, hash_partition_body_id<K>(),
                                                               cap("n", num_partitions))};
}

// ---- groupByKey ----

template <Picklable K, Picklable V>
std::string partition_filter_body_id() {
  return "scp.partfilter[" + tag_of<K>().canonical() + "," + tag_of<V>().canonical() + "]";
}

template <Picklable K, Picklable V>
std::string group_local_body_id() {
  return "scp.group[" + tag_of<K>().canonical() + "," + tag_of<V>().canonical() + "]";
}

template <Picklable K, Picklable V>
void register_group_by_support(Registry& reg) {
  using KV = std::pair<K, V>;
  using Grouped = std::pair<K, std::vector<V>>;
  reg.picklers().derive<std::vector<KV>>();
  reg.picklers().derive<std::vector<Grouped>>();
  register_partitioner_support<K>(reg);
  register_union_support<KV>(reg);

  std::string part_id = partition_filter_body_id<K, V>();
  if (!reg.bodies().contains(part_id)) {
    reg.bodies().add_unary<std::vector<KV>, std::vector<KV>>(
        part_id, [](EnvView env, const std::vector<KV>& xs) {
          auto part = env.get<SporeFn<K, int32_t>>(0).bind(env.registry());
          int32_t want = env.get<int32_t>(1);
          std::vector<KV> out;
          for (const KV& kv : xs)
            if (part(kv.first) == want) out.push_back(kv);
          return out;
        });
  }

  std::string group_id = group_local_body_id<K, V>();
  if (!reg.bodies().contains(group_id)) {
    reg.bodies().add_unary<std::vector<KV>, std::vector<Grouped>>(
        group_id, [](EnvView, const std::vector<KV>& xs) {
          std::vector<Grouped> out;
          std::unordered_map<Bytes, size_t> index;
          index.reserve(xs.size());
          for (const KV& kv : xs) {
            auto [it, fresh] = index.try_emplace(canonical_bytes(kv.first), out.size());
            if (fresh) out.push_back({kv.first, {}});
            out[it->second].second.push_back(kv.second);
          }
          return out;
        });
  }
}

// The three-step shuffle: each input silo is split into N partition silos by
// apply; partitions bound for destination j are combined pairwise with
// pump_to at places[j]; one final apply groups values per key. Output silo j
// holds exactly the keys the partitioner maps to j.
template <Picklable K, Picklable V>
std::vector<SiloRef<std::vector<std::pair<K, std::vector<V>>>>> group_by_key(
    NodeRuntime& rt, const std::vector<SiloRef<std::vector<std::pair<K, V>>>>& silos,
    const Partitioner<K>& part, const std::vector<Place>& places) {
  using KV = std::pair<K, V>;
  using Grouped = std::pair<K, std::vector<V>>;
  const size_t n = silos.size();
  if (n != places.size() || static_cast<int32_t>(n) != part.num_partitions)
    raise(Errc::size_mismatch, "group_by_key needs silos.size == places.size == num_partitions (got " +
                                   std::to_string(n) + ", " + std::to_string(places.size()) + ", " +
                                   std::to_string(part.num_partitions) + ")");
  if (n < 2) raise(Errc::size_mismatch, "group_by_key needs at least two partitions");

  const Registry& reg = rt.registry();
  PumpFn<KV, KV> pass = passthrough_pump<KV>(reg);

  // partition silos: local[i][j] holds input i's pairs destined for j
  std::vector<std::vector<SiloRef<std::vector<KV>>>> local(n);
  for (size_t i = 0; i < n; ++i) {
    local[i].reserve(n);
    for (size_t j = 0; j < n; ++j) {
      auto filter = make_spore<std::vector<KV>, std::vector<KV>>(
          reg, partition_filter_body_id<K, V>(), cap("part", part.fn),
          cap("j", static_cast<int32_t>(j)));
      local[i].push_back(silos[i].apply(filter));
    }
  }

  std::vector<SiloRef<std::vector<Grouped>>> out;
  out.reserve(n);
  auto group = make_spore<std::vector<KV>, std::vector<Grouped>>(reg, group_local_body_id<K, V>());
  for (size_t j = 0; j < n; ++j) {
    // binary pump fan-in, left-leaning chain
    SiloRef<std::vector<KV>> combined =
        pump_to_vector<KV, KV>(rt, places[j], local[0][j], local[1][j], pass);
    for (size_t i = 2; i < n; ++i)
      combined = pump_to_vector<KV, KV>(rt, places[j], combined, local[i][j], pass);
    out.push_back(combined.apply(group));
  }
  return out;
}

// ---- hash join ----

template <Picklable A, Picklable B, Picklable K>
using JoinTriple = std::tuple<K, std::optional<A>, std::optional<B>>;

template <Picklable A, Picklable B, Picklable K>
std::string join_tag_left_body_id() {
  return "scp.jtagl[" + tag_of<A>().canonical() + "," + tag_of<B>().canonical() + "," +
         tag_of<K>().canonical() + "]";
}

template <Picklable A, Picklable B, Picklable K>
std::string join_tag_right_body_id() {
  return "scp.jtagr[" + tag_of<A>().canonical() + "," + tag_of<B>().canonical() + "," +
         tag_of<K>().canonical() + "]";
}

template <Picklable A, Picklable B, Picklable K>
std::string join_merge_body_id() {
  return "scp.jmerge[" + tag_of<A>().canonical() + "," + tag_of<B>().canonical() + "," +
         tag_of<K>().canonical() + "]";
}

template <Picklable A, Picklable B, Picklable K>
void register_join_support(Registry& reg) {
  using Triple = JoinTriple<A, B, K>;
  using Out = std::pair<K, std::pair<A, B>>;
  reg.picklers().derive<std::vector<A>>();
  reg.picklers().derive<std::vector<B>>();
  reg.picklers().derive<std::vector<Triple>>();
  reg.picklers().derive<std::vector<Out>>();
  reg.picklers().ensure<SporeFn<A, K>>();
  reg.picklers().ensure<SporeFn<B, K>>();
  register_union_support<Triple>(reg);

  std::string left_id = join_tag_left_body_id<A, B, K>();
  if (!reg.bodies().contains(left_id)) {
    reg.bodies().add_unary<std::vector<A>, std::vector<Triple>>(
        left_id, [](EnvView env, const std::vector<A>& xs) {
          auto hash = env.get<SporeFn<A, K>>(0).bind(env.registry());
          std::vector<Triple> out;
          out.reserve(xs.size());
          for (const A& x : xs) out.push_back({hash(x), std::optional<A>(x), std::nullopt});
          return out;
        });
  }
  std::string right_id = join_tag_right_body_id<A, B, K>();
  if (!reg.bodies().contains(right_id)) {
    reg.bodies().add_unary<std::vector<B>, std::vector<Triple>>(
        right_id, [](EnvView env, const std::vector<B>& xs) {
          auto hash = env.get<SporeFn<B, K>>(0).bind(env.registry());
          std::vector<Triple> out;
          out.reserve(xs.size());
          for (const B& x : xs) out.push_back({hash(x), std::nullopt, std::optional<B>(x)});
          return out;
        });
  }
  std::string merge_id = join_merge_body_id<A, B, K>();
  if (!reg.bodies().contains(merge_id)) {
    // sort the combined triples by key, then cross-combine adjacent runs
    reg.bodies().add_unary<std::vector<Triple>, std::vector<Out>>(
        merge_id, [](EnvView, const std::vector<Triple>& xs) {
          std::vector<std::pair<Bytes, size_t>> keyed;
          keyed.reserve(xs.size());
          for (size_t i = 0; i < xs.size(); ++i)
            keyed.push_back({canonical_bytes(std::get<0>(xs[i])), i});
          std::sort(keyed.begin(), keyed.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
          std::vector<Out> out;
          size_t i = 0;
          while (i < keyed.size()) {
            size_t j = i;
            while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
            std::vector<const A*> lefts;
            std::vector<const B*> rights;
            for (size_t k = i; k < j; ++k) {
              const Triple& t = xs[keyed[k].second];
              if (std::get<1>(t)) lefts.push_back(&*std::get<1>(t));
              if (std::get<2>(t)) rights.push_back(&*std::get<2>(t));
            }
            const K& key = std::get<0>(xs[keyed[i].second]);
            for (const A* a : lefts)
              for (const B* b : rights) out.push_back({key, {*a, *b}});
            i = j;
          }
          return out;
        });
  }
}

// All (k, (a, b)) with hashA(a) == hashB(b) == k, as a multiset over the
// per-key cross products; materialized at dest.
template <Picklable A, Picklable B, Picklable K>
SiloRef<std::vector<std::pair<K, std::pair<A, B>>>> hash_join(
    NodeRuntime& rt, const Place& dest, const SiloRef<std::vector<A>>& silo1,
    const SiloRef<std::vector<B>>& silo2, const SporeFn<A, K>& hashA, const SporeFn<B, K>& hashB) {
  using Triple = JoinTriple<A, B, K>;
  using Out = std::pair<K, std::pair<A, B>>;
  const Registry& reg = rt.registry();
  auto tagged1 = silo1.apply(make_spore<std::vector<A>, std::vector<Triple>>(
      reg, join_tag_left_body_id<A, B, K>(), cap("hash", hashA)));
  auto tagged2 = silo2.apply(make_spore<std::vector<B>, std::vector<Triple>>(
      reg, join_tag_right_body_id<A, B, K>(), cap("hash", hashB)));
  auto combined =
      pump_to_vector<Triple, Triple>(rt, dest, tagged1, tagged2, passthrough_pump<Triple>(reg));
  return combined.apply(make_spore<std::vector<Triple>, std::vector<Out>>(
      reg, join_merge_body_id<A, B, K>()));
}

}  // namespace scp
