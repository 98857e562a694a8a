#pragma once

#include <random>

#include "combinators.hpp"

namespace scp {

// The record type the serialization benchmark runs over.
struct Person {
  std::int64_t id = 0;
  std::string name;
  std::int32_t age = 0;

  friend bool operator==(const Person&, const Person&) = default;
};

}  // namespace scp

SCP_RECORD_NAMED(scp::Person, "Person", id, name, age)

namespace scp {

namespace detail {
inline constexpr const char* kFirstNames[] = {
    "Ada",  "Alan",  "Grace", "Edsger", "Barbara", "Donald", "John",  "Leslie",
    "Niklaus", "Robin", "Tony", "Frances", "Kathleen", "Dennis", "Ken", "Bjarne"};
inline constexpr const char* kLastNames[] = {
    "Lovelace", "Turing", "Hopper", "Dijkstra", "Liskov",  "Knuth",  "Backus", "Lamport",
    "Wirth",    "Milner", "Hoare",  "Allen",    "Booth",   "Ritchie", "Thompson", "Moore"};
}  // namespace detail

// Deterministic for a fixed seed; ages uniform in [0, 100).
inline std::vector<Person> gen_people(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Person> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Person p;
    p.id = static_cast<int64_t>(i);
    p.name = std::string(detail::kFirstNames[rng() % 16]) + " " + detail::kLastNames[rng() % 16];
    p.age = static_cast<int32_t>(rng() % 100);
    out.push_back(std::move(p));
  }
  return out;
}

inline int32_t age_bucket(int32_t age) { return age / 10; }

inline constexpr const char* kAgeBucketBodyId = "bench.age_bucket";

// Everything the map + groupByKey benchmark pipeline needs, identical on
// every participating node.
inline void register_bench_support(Registry& reg) {
  reg.picklers().derive<Person>();
  reg.picklers().derive<std::vector<Person>>();
  register_map_support<Person, std::pair<int32_t, Person>>(reg);
  register_group_by_support<int32_t, Person>(reg);
  if (!reg.bodies().contains(kAgeBucketBodyId)) {
    reg.bodies().add_unary<Person, std::pair<int32_t, Person>>(
        kAgeBucketBodyId,
        [](EnvView, const Person& p) { return std::make_pair(age_bucket(p.age), p); });
  }
}

}  // namespace scp
