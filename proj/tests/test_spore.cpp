#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <scp/spore.hpp>

using namespace scp;

namespace {

// The string/int universe of the classic capture example: a spore capturing
// y1: String and y2: Int whose body is y1 + y2 + x.
std::shared_ptr<Registry> concat_registry() {
  auto reg = std::make_shared<Registry>();
  reg->picklers().ensure<std::string>();
  reg->picklers().ensure<int32_t>();
  reg->picklers().ensure<int64_t>();
  reg->bodies().add_unary<int32_t, std::string>("concatYs", [](EnvView env, int32_t x) {
    return env.get<std::string>(0) + std::to_string(env.get<int32_t>(1)) + std::to_string(x);
  });
  reg->bodies().add_unary<int32_t, int32_t>("id32", [](EnvView, int32_t x) { return x; });
  reg->bodies().add_unary<int32_t, int32_t>("plusY",
                                            [](EnvView env, int32_t x) { return x + env.get<int32_t>(0); });
  reg->bodies().add_unary<int32_t, int32_t>("timesY",
                                            [](EnvView env, int32_t x) { return x * env.get<int32_t>(0); });
  reg->bodies().add_unary<std::string, int32_t>("lenPlus", [](EnvView env, const std::string& s) {
    return static_cast<int32_t>(s.size()) + env.get<int32_t>(0);
  });
  reg->bodies().add_unary<std::string, int32_t>("strlen32", [](EnvView, const std::string& s) {
    return static_cast<int32_t>(s.size());
  });
  return reg;
}

bool code_is(const Error& e, Errc c) { return e.code() == c; }

}  // namespace

TEST_CASE("registry rejects duplicates and unknown ids", "[spore]") {
  auto reg = concat_registry();
  CHECK_THROWS_MATCHES(
      (reg->bodies().add_unary<int32_t, int32_t>("id32", [](EnvView, int32_t x) { return x; })),
      Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) { return code_is(e, Errc::duplicate_body_id); }));
  CHECK_THROWS_MATCHES(reg->bodies().entry("missing"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return code_is(e, Errc::unknown_body_id); }));
  CHECK_THROWS_MATCHES((make_spore<int32_t, int32_t>(*reg, "missing")), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return code_is(e, Errc::unknown_body_id); }));
}

TEST_CASE("captured descriptor lists header types in declaration order", "[spore]") {
  auto reg = concat_registry();
  auto s = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("a")),
                                            cap("y2", int32_t{1}));
  REQUIRE(s.spore().captured.size() == 2);
  CHECK(s.spore().captured[0] == tags::string());
  CHECK(s.spore().captured[1] == tags::int32());
  CHECK(s.spore().env.size() == 2);
  CHECK(s.spore().env[0].name == "y1");
  CHECK(s.spore().input == tags::int32());
  CHECK(s.spore().output == tags::string());
  CHECK(s.spore().excluded.empty());

  auto empty = make_spore<int32_t, int32_t>(*reg, "id32");
  CHECK(empty.spore().captured.empty());
  CHECK(empty.spore().env.empty());
}

TEST_CASE("spore evaluation equals the plain closure", "[spore]") {
  auto reg = concat_registry();
  auto s = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("a")),
                                            cap("y2", int32_t{1}));
  CHECK(s.eval(*reg, 2) == "a12");

  auto id = make_spore<int32_t, int32_t>(*reg, "id32");
  CHECK(id.eval(*reg, 7) == 7);

  // randomized header bindings vs. evaluating the closure directly
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    std::string y1(rng() % 8, static_cast<char>('a' + rng() % 26));
    int32_t y2 = static_cast<int32_t>(rng() % 1000) - 500;
    int32_t x = static_cast<int32_t>(rng() % 1000) - 500;
    auto sp = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", y1), cap("y2", y2));
    std::string direct = y1 + std::to_string(y2) + std::to_string(x);
    CHECK(sp.eval(*reg, x) == direct);
  }
}

TEST_CASE("dynamic construction rejects unencodable captures", "[spore]") {
  auto reg = concat_registry();
  struct Opaque {
    int fd;
  };
  CHECK_THROWS_MATCHES(
      make_spore_dynamic(*reg, "concatYs", {DynCapture{"h", std::any(Opaque{3})}}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return code_is(e, Errc::unencodable_capture); }));

  // and the typed path rejects registered-universe types whose picklers were
  // never installed in this registry
  CHECK_THROWS_MATCHES(
      (make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", std::optional<int32_t>(1)),
                                    cap("z", int32_t{0}))),
      Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return code_is(e, Errc::unencodable_capture); }));
}

TEST_CASE("dynamic construction mirrors the typed path", "[spore]") {
  auto reg = concat_registry();
  Spore dyn = make_spore_dynamic(*reg, "concatYs",
                                 {DynCapture{"y1", std::any(std::string("a"))},
                                  DynCapture{"y2", std::any(int32_t{1})}});
  auto typed = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("a")),
                                                cap("y2", int32_t{1}));
  CHECK(dyn == typed.spore());
  CHECK(std::any_cast<std::string>(eval_spore(*reg, dyn, std::any(int32_t{2}))) == "a12");
}

TEST_CASE("spores evaluate identically after a trip through a peer registry", "[spore][property]") {
  auto reg = concat_registry();
  auto peer = concat_registry();  // same contents, distinct instance
  REQUIRE(reg->fingerprint() == peer->fingerprint());
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    std::string y1(rng() % 6, static_cast<char>('a' + rng() % 26));
    int32_t y2 = static_cast<int32_t>(rng() % 100);
    auto sp = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", y1), cap("y2", y2));
    Spore shipped = unpickle_spore(pickle_spore(sp.spore()));
    int32_t x = static_cast<int32_t>(rng() % 100);
    std::any remote = eval_spore(*peer, shipped, std::any(x));
    CHECK(std::any_cast<std::string>(remote) == sp.eval(*reg, x));
  }
}

TEST_CASE("every constructible spore has remotely decodable captures", "[spore][property]") {
  auto reg = concat_registry();
  auto peer = concat_registry();
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    auto sp = make_spore<int32_t, int32_t>(*reg, "plusY",
                                           cap("y", static_cast<int32_t>(rng() % 1000)));
    Spore shipped = unpickle_spore(pickle_spore(sp.spore()));
    // decoding the env with the recorded picklers never raises
    CHECK(decode_spore_env(*peer, shipped).size() == 1);
  }
}

TEST_CASE("compose concatenates descriptors and chains behavior", "[spore]") {
  auto reg = concat_registry();
  // s1: Int -> String capturing (String, Int); s2: String -> Int capturing
  // nothing; s1 compose s2 : String -> String still captures (String, Int)
  auto s1 = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("a")),
                                             cap("y2", int32_t{1}));
  auto s2 = make_spore<std::string, int32_t>(*reg, "strlen32");
  auto c = compose(s1, s2);
  REQUIRE(c.spore().captured.size() == 2);
  CHECK(c.spore().captured[0] == tags::string());
  CHECK(c.spore().captured[1] == tags::int32());
  CHECK(c.spore().input == tags::string());
  CHECK(c.spore().output == tags::string());
  CHECK(c.eval(*reg, std::string("xx")) == "a12");

  // s1 captures (Int), s2 captures (String via lenPlus? -> use plusY/lenPlus shapes)
  auto plus = make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", int32_t{5}));
  auto len = make_spore<std::string, int32_t>(*reg, "lenPlus", cap("base", int32_t{10}));
  auto both = compose(plus, len);  // plus after len: String -> Int
  REQUIRE(both.spore().captured.size() == 2);
  CHECK(both.spore().captured[0] == tags::int32());  // len's capture first
  CHECK(both.spore().captured[1] == tags::int32());
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    std::string input(rng() % 12, 'x');
    CHECK(both.eval(*reg, input) == len.eval(*reg, input) + 5);
  }

  CHECK_THROWS_MATCHES(compose_spores(len.spore(), len.spore()), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return code_is(e, Errc::type_mismatch); }));
}

TEST_CASE("composition is associative in behavior and descriptor", "[spore][property]") {
  auto reg = concat_registry();
  std::mt19937_64 rng(29);
  for (int i = 0; i < 50; ++i) {
    auto a = make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", static_cast<int32_t>(rng() % 50)));
    auto b = make_spore<int32_t, int32_t>(*reg, "timesY", cap("y", static_cast<int32_t>(rng() % 5)));
    auto c = make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", static_cast<int32_t>(rng() % 50)));
    auto left = compose(compose(a, b), c);
    auto right = compose(a, compose(b, c));
    CHECK(left.spore().captured == right.spore().captured);
    for (int x = -3; x <= 3; ++x) CHECK(left.eval(*reg, x) == right.eval(*reg, x));
  }

  // identity is a unit for the descriptor
  auto id = make_spore<int32_t, int32_t>(*reg, "id32");
  auto f = make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", int32_t{3}));
  CHECK(compose(id, f).spore().captured == f.spore().captured);
  CHECK(compose(f, id).spore().captured == f.spore().captured);
  for (int x = -5; x <= 5; ++x) {
    CHECK(compose(id, f).eval(*reg, x) == f.eval(*reg, x));
    CHECK(compose(f, id).eval(*reg, x) == f.eval(*reg, x));
  }
}

TEST_CASE("corrupt env bytes raise DecodeFailure at evaluation", "[spore]") {
  auto reg = concat_registry();
  auto s = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("abc")),
                                            cap("y2", int32_t{1}));
  Spore damaged = s.spore();
  damaged.env[0].value.resize(damaged.env[0].value.size() - 2);  // truncate the string capture
  CHECK_THROWS_MATCHES(eval_spore(*reg, damaged, std::any(int32_t{2})), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return code_is(e, Errc::decode_failure); }));
}

TEST_CASE("spore wire round trip is equal and byte-stable", "[spore]") {
  auto reg = concat_registry();
  auto s = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("a")),
                                            cap("y2", int32_t{1}));
  Bytes enc = pickle_spore(s.spore());
  Spore back = unpickle_spore(enc);
  CHECK(back == s.spore());
  CHECK(pickle_spore(back) == enc);
  CHECK(std::any_cast<std::string>(eval_spore(*reg, back, std::any(int32_t{2}))) == "a12");

  CHECK_THROWS_MATCHES(unpickle_spore(std::string_view(enc).substr(0, enc.size() - 3)), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return code_is(e, Errc::decode_failure); }));
}

TEST_CASE("composed spores survive the wire", "[spore]") {
  auto reg = concat_registry();
  auto s1 = make_spore<int32_t, std::string>(*reg, "concatYs", cap("y1", std::string("q")),
                                             cap("y2", int32_t{4}));
  auto f = make_spore<int32_t, int32_t>(*reg, "plusY", cap("y", int32_t{5}));
  auto c = compose(compose(s1, f), make_spore<int32_t, int32_t>(*reg, "timesY", cap("y", int32_t{2})));
  Spore shipped = unpickle_spore(pickle_spore(c.spore()));
  CHECK(shipped == c.spore());
  auto peer = concat_registry();
  CHECK(std::any_cast<std::string>(eval_spore(*peer, shipped, std::any(int32_t{3}))) ==
        c.eval(*reg, 3));
}
