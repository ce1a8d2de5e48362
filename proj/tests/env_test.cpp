#include <doctest.h>

#include "favalon/environment.hpp"

using namespace favalon;

TEST_CASE("single binding resolves") {
  TypeEnvironment env;
  env = favalon::bind(env, "x", kDefaultAttrs, constant(host_int(123), t_int()));
  const auto* list = favalon::lookup(env, "x");
  REQUIRE(list);
  REQUIRE(list->size() == 1);
  CHECK(serialize(list->front().value) == "Constant(123, Int)");
}

TEST_CASE("rebinding appends overloads in registration order") {
  TypeEnvironment env;
  env = favalon::bind(env, "f", kDefaultAttrs, type_term("Int"));
  env = favalon::bind(env, "f", kDefaultAttrs, type_term("Str"));
  const auto* list = favalon::lookup(env, "f");
  REQUIRE(list);
  REQUIRE(list->size() == 2);
  CHECK(as<TypeTermNode>((*list)[0].value)->name == "Int");
  CHECK(as<TypeTermNode>((*list)[1].value)->name == "Str");
}

TEST_CASE("attribute query returns the bound fixity") {
  TypeEnvironment env;
  env = favalon::bind(env, "->", kInfixRtl, variable("->"));
  auto attrs = env.attributes("->");
  REQUIRE(attrs);
  CHECK(attrs->fixity == Fixity::Infix);
  CHECK(attrs->assoc == Assoc::Rtl);
}

TEST_CASE("lookup misses are a value, not an error") {
  TypeEnvironment env;
  CHECK(favalon::lookup(env, "nosuch") == nullptr);
}

TEST_CASE("inner scopes shadow outer overload sets entirely") {
  TypeEnvironment outer;
  outer.bind("x", kDefaultAttrs, constant(host_int(2), t_int()));
  outer.bind("x", kDefaultAttrs, constant(host_int(22), t_int()));
  TypeEnvironment inner = outer.push_scope();
  inner.bind("x", kDefaultAttrs, constant(host_int(1), t_int()));
  const auto* list = inner.lookup("x");
  REQUIRE(list);
  REQUIRE(list->size() == 1);
  CHECK(serialize(list->front().value) == "Constant(1, Int)");
  // the outer environment is untouched
  CHECK(outer.lookup("x")->size() == 2);
}

TEST_CASE("environments are persistent: old copies observe pre-bind state") {
  TypeEnvironment before;
  before.bind("a", kDefaultAttrs, constant(host_int(1), t_int()));
  TypeEnvironment snapshot = before;
  before.bind("b", kDefaultAttrs, constant(host_int(2), t_int()));
  CHECK(before.lookup("b") != nullptr);
  CHECK(snapshot.lookup("b") == nullptr);
  CHECK(snapshot.lookup("a") != nullptr);
}

TEST_CASE("completion lists bound names by prefix") {
  TypeEnvironment env;
  env.bind("toInt", kDefaultAttrs, variable("toInt"));
  env.bind("toFloat", kDefaultAttrs, variable("toFloat"));
  env.bind("echo", kDefaultAttrs, variable("echo"));
  auto names = env.complete("to");
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "toFloat");
  CHECK(names[1] == "toInt");
}

TEST_CASE("duplicate conversion replaces and warns") {
  TypeEnvironment env;
  std::string warning;
  env.register_conversion(Conversion{"one", t_textwriter(), t_bytestream(), 2, {}});
  env.register_conversion(Conversion{"two", t_textwriter(), t_bytestream(), 2, {}},
                          [&](const std::string& w) { warning = w; });
  REQUIRE(env.conversions().size() == 1);
  CHECK(env.conversions()[0].name == "two");
  CHECK(!warning.empty());
}

TEST_CASE("conversions stay sorted by priority") {
  TypeEnvironment env;
  env.register_conversion(Conversion{"three", lineseq_of(t_str()), t_bytestream(), 3, {}});
  env.register_conversion(Conversion{"one", t_bytestream(), t_bytestream(), 1, {}});
  env.register_conversion(Conversion{"two", t_textwriter(), t_bytestream(), 2, {}});
  REQUIRE(env.conversions().size() == 3);
  CHECK(env.conversions()[0].name == "one");
  CHECK(env.conversions()[1].name == "two");
  CHECK(env.conversions()[2].name == "three");
}
