#include <catch2/catch_amalgamated.hpp>

#include "support/harness.hpp"

using namespace scp;
using namespace scptest;

namespace {

bool code_is(const Error& e, Errc c) { return e.code() == c; }

template <class F>
Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an scp::Error");
  return Errc::decode_failure;
}

}  // namespace

TEST_CASE("populate then send returns the data", "[runtime]") {
  LocalCluster cluster(2, test_registry());
  auto ref = populate<I>(cluster.driver(), cluster.place(1), {1, 2, 3});
  CHECK(ref.send().get() == std::vector<I>{1, 2, 3});

  auto empty = populate<I>(cluster.driver(), cluster.place(2), {});
  CHECK(empty.send().get().empty());
}

TEST_CASE("populate to a down node raises NodeUnreachable", "[runtime]") {
  LocalCluster cluster(1, test_registry());
  CHECK(error_code_of([&] {
          populate<I>(cluster.driver(), Place{9, ""}, {1});
        }) == Errc::node_unreachable);
}

TEST_CASE("apply is lazy and send costs exactly two frames", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(2, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {1, 2, 3});

  auto add1 = make_spore<I, I>(*reg, "t.addc", cap("c", I{1}));
  FrameCounters before = cluster.counters();
  auto cur = map_silo(ref, add1);
  for (int i = 0; i < 9; ++i) cur = map_silo(cur, add1);
  FrameCounters lazy = cluster.counters() - before;
  CHECK(lazy.frames == 0);

  auto fut = cur.send();
  CHECK(fut.get() == std::vector<I>{11, 12, 13});
  FrameCounters during = cluster.counters() - before;
  CHECK(during.frames == 2);
  CHECK(during.of(MsgTag::send_request) == 1);
  CHECK(during.of(MsgTag::send_reply) == 1);
}

TEST_CASE("apply(identity) then send equals the original", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto ref = populate<I>(cluster.driver(), cluster.place(1), {5, 6});
  auto same = ref.apply(identity_spore<std::vector<I>>(*reg));
  CHECK(multiset_eq(same.send().get(), ref.send().get()));
}

TEST_CASE("each apply in a chain evaluates exactly once, then memoizes", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {10});
  auto add = make_spore<I, I>(*reg, "t.addc", cap("c", I{2}));
  auto derived = map_silo(map_silo(ref, add), add);

  REQUIRE(cluster.node(1).stats().apply_evaluations == 0);
  CHECK(derived.send().get() == std::vector<I>{14});
  CHECK(cluster.node(1).stats().apply_evaluations == 2);

  // repeated send: same data, no re-evaluation, two more frames
  FrameCounters before = cluster.counters();
  CHECK(derived.send().get() == std::vector<I>{14});
  CHECK(cluster.node(1).stats().apply_evaluations == 2);
  CHECK((cluster.counters() - before).frames == 2);
}

TEST_CASE("two refs over the same parent share its evaluation", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {1, 2});
  auto add = make_spore<I, I>(*reg, "t.addc", cap("c", I{1}));
  auto parent = map_silo(ref, add);
  auto left = map_silo(parent, add);
  auto right = map_silo(parent, add);

  // both sends issued before awaiting either; the shared parent runs once
  auto f1 = left.send();
  auto f2 = right.send();
  CHECK(f1.get() == std::vector<I>{3, 4});
  CHECK(f2.get() == std::vector<I>{3, 4});
  CHECK(cluster.node(1).stats().apply_evaluations == 3);
}

TEST_CASE("concurrent duplicate sends both complete with one evaluation", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {4});
  auto derived = map_silo(ref, make_spore<I, I>(*reg, "t.addc", cap("c", I{1})));
  FrameCounters before = cluster.counters();
  auto f1 = derived.send();
  auto f2 = derived.send();
  CHECK(f1.get() == std::vector<I>{5});
  CHECK(f2.get() == std::vector<I>{5});
  CHECK(cluster.node(1).stats().apply_evaluations == 1);
  FrameCounters d = cluster.counters() - before;
  CHECK(d.of(MsgTag::send_request) == 2);
  CHECK(d.of(MsgTag::send_reply) == 2);  // exactly one terminal reply per request
}

TEST_CASE("a lineage naming an unregistered body fails remotely", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {1});

  Spore bogus;
  bogus.body_id = "t.not_registered_anywhere";
  bogus.input = tag_of<std::vector<I>>();
  bogus.output = tag_of<std::vector<I>>();
  LineagePtr lin = Lineage::apply(drv.new_silo_id(), tag_of<std::vector<I>>(), ref.lineage(), bogus);
  SiloRef<std::vector<I>> bad(&drv, lin);

  CHECK(error_code_of([&] { bad.send().get(); }) == Errc::remote_eval_error);
}

TEST_CASE("a missing source silo reports UnknownSilo", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  LineagePtr lin = Lineage::source(SiloId{0, 424242}, tag_of<std::vector<I>>(), cluster.place(1));
  SiloRef<std::vector<I>> ghost(&drv, lin);
  CHECK(error_code_of([&] { ghost.send().get(); }) == Errc::unknown_silo);
}

TEST_CASE("a throwing body completes the future with RemoteEvalError", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {1, 2, 3});
  auto bad = map_silo(ref, make_spore<I, I>(*reg, "t.fail_on", cap("c", I{2})));
  try {
    bad.send().get();
    FAIL("expected RemoteEvalError");
  } catch (const Error& e) {
    CHECK(code_is(e, Errc::remote_eval_error));
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
}

TEST_CASE("source silo bytes are unchanged by derived materializations", "[runtime]") {
  auto reg = test_registry();
  LocalCluster cluster(1, reg);
  auto& drv = cluster.driver();
  auto ref = populate<I>(drv, cluster.place(1), {3, 1, 2});
  Bytes before = ref.send_raw().get().data;
  auto add = make_spore<I, I>(*reg, "t.addc", cap("c", I{5}));
  map_silo(map_silo(ref, add), add).send().get();
  union_silos(drv, cluster.place(1), ref, ref).send().get();
  Bytes after = ref.send_raw().get().data;
  CHECK(before == after);
}

TEST_CASE("requests time out as NodeUnreachable when nothing answers", "[runtime]") {
  // a transport that accepts sends and drops them silently
  struct BlackholeTransport final : Transport {
    void start(int32_t, uint64_t, Deliver) override {}
    void stop() override {}
    void send(const Place&, const Bytes&) override {}
    void probe(const Place&) override {}
  };
  NodeConfig cfg;
  cfg.self = Place{0, ""};
  cfg.peers = {Place{1, ""}};
  cfg.request_timeout = std::chrono::milliseconds(120);
  NodeRuntime rt(cfg, test_registry(), std::make_shared<BlackholeTransport>());
  rt.start();
  LineagePtr lin = Lineage::source(SiloId{0, 7}, tag_of<std::vector<I>>(), Place{1, ""});
  auto fut = rt.request_send(lin);
  auto t0 = std::chrono::steady_clock::now();
  CHECK(error_code_of([&] { fut.get(); }) == Errc::node_unreachable);
  auto waited = std::chrono::steady_clock::now() - t0;
  CHECK(waited >= std::chrono::milliseconds(100));
  CHECK(waited < std::chrono::seconds(5));
  rt.stop();
}

TEST_CASE("loopback hub rejects mismatched registries at attach", "[runtime]") {
  auto reg = test_registry();
  auto hub = std::make_shared<LoopbackHub>();
  NodeConfig cfg;
  cfg.self = Place{1, ""};
  NodeRuntime a(cfg, reg, std::make_shared<LoopbackTransport>(hub));
  a.start();

  auto other = std::make_shared<Registry>();
  register_test_universe(*other);
  other->bodies().add_unary<I, I>("t.only_here", [](EnvView, I x) { return x; });
  NodeConfig cfg2;
  cfg2.self = Place{2, ""};
  NodeRuntime b(cfg2, std::shared_ptr<const Registry>(other), std::make_shared<LoopbackTransport>(hub));
  CHECK(error_code_of([&] { b.start(); }) == Errc::registry_mismatch);
  a.stop();
}

TEST_CASE("distributed results match the reference evaluator on random chains", "[runtime][property]") {
  auto reg = test_registry();
  std::mt19937_64 rng(59);
  for (int round = 0; round < 10; ++round) {
    LocalCluster cluster(2, reg);
    auto& drv = cluster.driver();
    ReferenceEvaluator oracle(reg);
    std::vector<I> data = random_ints(rng, 40);
    auto ref = populate<I>(drv, cluster.place(1 + static_cast<int>(rng() % 2)), data);
    oracle.add_source(ref, data);
    auto cur = ref;
    int steps = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < steps; ++i) {
      if (rng() % 2)
        cur = map_silo(cur, make_spore<I, I>(*reg, "t.addc", cap("c", static_cast<I>(rng() % 9))));
      else
        cur = map_silo(cur, make_spore<I, I>(*reg, "t.mulc", cap("c", static_cast<I>(rng() % 4))));
    }
    CHECK(multiset_eq(cur.send().get(), oracle.eval_as(cur)));
  }
}
