#include <catch2/catch_amalgamated.hpp>

#include "support/harness.hpp"

using namespace scp;
using namespace scptest;

TEST_CASE("union is the multiset sum", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2});
  auto b = populate<I>(drv, cluster.place(2), {2, 3});
  auto u = union_silos(drv, cluster.place(3), a, b);
  CHECK(multiset_eq(u.send().get(), {1, 2, 2, 3}));

  auto empty = populate<I>(drv, cluster.place(2), {});
  auto u2 = union_silos(drv, cluster.place(1), a, empty);
  CHECK(multiset_eq(u2.send().get(), {1, 2}));
}

TEST_CASE("union size is additive on random inputs", "[pump][property]") {
  auto reg = test_registry();
  std::mt19937_64 rng(61);
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  for (int i = 0; i < 20; ++i) {
    std::vector<I> xs = random_ints(rng, 30);
    std::vector<I> ys = random_ints(rng, 30);
    auto a = populate<I>(drv, cluster.place(1), xs);
    auto b = populate<I>(drv, cluster.place(2), ys);
    auto u = union_silos(drv, cluster.place(1 + static_cast<int>(rng() % 3)), a, b);
    CHECK(u.send().get().size() == xs.size() + ys.size());
  }
}

TEST_CASE("pump_to is lazy until send", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1});
  auto b = populate<I>(drv, cluster.place(2), {2});
  FrameCounters before = cluster.counters();
  auto u = union_silos(drv, cluster.place(3), a, b);
  auto v = union_silos(drv, cluster.place(1), u, b);
  CHECK((cluster.counters() - before).frames == 0);
  CHECK(multiset_eq(v.send().get(), {1, 2, 2}));
}

TEST_CASE("two sources of two elements produce two batches and two dones", "[pump]") {
  auto reg = test_registry();
  NodeConfig proto;
  proto.batch_size = 100;
  LocalCluster cluster(3, reg, proto);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2});
  auto b = populate<I>(drv, cluster.place(2), {3, 4});
  FrameCounters before = cluster.counters();
  auto u = union_silos(drv, cluster.place(3), a, b);
  CHECK(u.send().get().size() == 4);
  FrameCounters d = cluster.counters() - before;
  CHECK(d.of(MsgTag::emit_batch) == 2);
  CHECK(d.of(MsgTag::pump_done) == 2);
  CHECK(d.of(MsgTag::pump_request) == 2);
  CHECK(d.of(MsgTag::emit_ack) == 2);
}

TEST_CASE("batch size splits the stream: 3 values at batch 2 => 2 batches", "[pump]") {
  auto reg = test_registry();
  NodeConfig proto;
  proto.batch_size = 2;
  LocalCluster cluster(2, reg, proto);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2, 3});
  auto b = populate<I>(drv, cluster.place(1), {});
  FrameCounters before = cluster.counters();
  auto u = union_silos(drv, cluster.place(2), a, b);
  CHECK(multiset_eq(u.send().get(), {1, 2, 3}));
  FrameCounters d = cluster.counters() - before;
  CHECK(d.of(MsgTag::emit_batch) == 2);  // 2 + 1
  CHECK(d.of(MsgTag::pump_done) == 2);   // one per source, the empty one included
}

TEST_CASE("a source that emits nothing sends only PumpDone", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(2, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2, 3});
  auto b = populate<I>(drv, cluster.place(1), {4});
  auto silent = make_pump_spore<I, I>(*reg, "t.emit_none");
  FrameCounters before = cluster.counters();
  auto out = pump_to_vector<I, I>(drv, cluster.place(2), a, b, silent);
  CHECK(out.send().get().empty());
  FrameCounters d = cluster.counters() - before;
  CHECK(d.of(MsgTag::emit_batch) == 0);
  CHECK(d.of(MsgTag::pump_done) == 2);
}

TEST_CASE("a spore may emit several values per element", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2});
  auto b = populate<I>(drv, cluster.place(2), {});
  auto twice = make_pump_spore<I, I>(*reg, "t.emit_twice");
  auto out = pump_to_vector<I, I>(drv, cluster.place(3), a, b, twice);
  CHECK(multiset_eq(out.send().get(), {1, 1, 2, 2}));
}

TEST_CASE("per-source emission order reaches the builder intact", "[pump]") {
  auto reg = test_registry();
  NodeConfig proto;
  proto.batch_size = 1;  // force many batches
  LocalCluster cluster(2, reg, proto);
  auto& drv = cluster.driver();
  std::vector<I> data;
  for (I i = 0; i < 20; ++i) data.push_back(i);
  auto a = populate<I>(drv, cluster.place(1), data);
  auto b = populate<I>(drv, cluster.place(1), {});
  auto u = union_silos(drv, cluster.place(2), a, b);
  // vector builder keeps arrival order; a single emitting source must arrive
  // in emission order even under the 4-batch window
  CHECK(u.send().get() == data);
}

TEST_CASE("backpressure window caps unacknowledged batches", "[pump]") {
  auto reg = test_registry();
  NodeConfig proto;
  proto.batch_size = 1;
  proto.emit_window = 2;
  LocalCluster cluster(2, reg, proto);
  auto& drv = cluster.driver();
  std::vector<I> data(50);
  for (I i = 0; i < 50; ++i) data[static_cast<size_t>(i)] = i;
  auto a = populate<I>(drv, cluster.place(1), data);
  auto b = populate<I>(drv, cluster.place(1), {});
  auto u = union_silos(drv, cluster.place(2), a, b);
  CHECK(u.send().get() == data);
  // every batch is eventually acknowledged
  FrameCounters c = cluster.counters();
  CHECK(c.of(MsgTag::emit_ack) == c.of(MsgTag::emit_batch));
}

TEST_CASE("a failing pump body aborts the pump and the waiter", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2, 3, 4, 5});
  auto b = populate<I>(drv, cluster.place(2), {6});
  auto failing = make_pump_spore<I, I>(*reg, "t.emit_fail_on", cap("c", I{4}));
  auto out = pump_to_vector<I, I>(drv, cluster.place(3), a, b, failing);
  try {
    out.send().get();
    FAIL("expected pump failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::remote_eval_error);
  }
}

TEST_CASE("an unregistered builder id fails with BuilderUnknown", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(2, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1});
  auto b = populate<I>(drv, cluster.place(1), {2});
  auto out = pump_to<std::vector<I>>(drv, cluster.place(2), a, b, passthrough_pump<I>(*reg),
                                     "list[NoSuchThing]");
  try {
    out.send().get();
    FAIL("expected BuilderUnknown");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::builder_unknown);
  }
}

TEST_CASE("pump with both sources on the destination node short-circuits", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2});
  auto b = populate<I>(drv, cluster.place(1), {3});
  auto u = union_silos(drv, cluster.place(1), a, b);
  CHECK(multiset_eq(u.send().get(), {1, 2, 3}));
}

TEST_CASE("applies compose over pump results", "[pump]") {
  auto reg = test_registry();
  LocalCluster cluster(3, reg);
  auto& drv = cluster.driver();
  auto a = populate<I>(drv, cluster.place(1), {1, 2});
  auto b = populate<I>(drv, cluster.place(2), {3});
  auto u = union_silos(drv, cluster.place(3), a, b);
  auto doubled = map_silo(u, make_spore<I, I>(*reg, "t.mulc", cap("c", I{2})));
  CHECK(multiset_eq(doubled.send().get(), {2, 4, 6}));

  // and pumps over pump results (chained fan-in)
  auto c = populate<I>(drv, cluster.place(1), {9});
  auto v = union_silos(drv, cluster.place(3), u, c);
  CHECK(multiset_eq(v.send().get(), {1, 2, 3, 9}));
}

TEST_CASE("pump results match the reference evaluator", "[pump][property]") {
  auto reg = test_registry();
  std::mt19937_64 rng(67);
  for (int round = 0; round < 10; ++round) {
    LocalCluster cluster(3, reg);
    auto& drv = cluster.driver();
    ReferenceEvaluator oracle(reg);
    std::vector<I> xs = random_ints(rng, 25);
    std::vector<I> ys = random_ints(rng, 25);
    auto a = populate<I>(drv, cluster.place(1), xs);
    auto b = populate<I>(drv, cluster.place(2), ys);
    oracle.add_source(a, xs);
    oracle.add_source(b, ys);
    auto fun = rng() % 2 ? make_pump_spore<I, I>(*reg, "t.emit_twice")
                         : passthrough_pump<I>(*reg);
    auto out = pump_to_vector<I, I>(drv, cluster.place(1 + static_cast<int>(rng() % 3)), a, b, fun);
    CHECK(multiset_eq(out.send().get(), oracle.eval_as(out)));
  }
}
