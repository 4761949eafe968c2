#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "muq/config.hpp"

using namespace muq;

TEST_CASE("parsing key=value text") {
    Config cfg = Config::from_string(R"(
# a comment
alpha = 0.005   # trailing comment
name = fiber run
count = 12
flag = true
list = 8, 16,32
)");
    CHECK(cfg.get_double("alpha") == 0.005);
    CHECK(cfg.get_string("name") == "fiber run");
    CHECK(cfg.get_int("count") == 12);
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_int_list("list") == std::vector<int>{8, 16, 32});
    CHECK_NOTHROW(cfg.finish());
}

TEST_CASE("malformed input is rejected") {
    CHECK_THROWS_AS(Config::from_string("novalue\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("= 3\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("a = 1\na = 2\n"), ConfigError);
    Config cfg = Config::from_string("x = notanumber\n");
    CHECK_THROWS_AS(cfg.get_double("x"), ConfigError);
    Config cfg2 = Config::from_string("x = 1.5\n");
    CHECK_THROWS_AS(cfg2.get_int("x"), ConfigError);
}

TEST_CASE("unknown keys fail loudly") {
    Config cfg = Config::from_string("known = 1\ntypo_key = 2\n");
    (void)cfg.get_int("known");
    CHECK_THROWS_AS(cfg.finish(), ConfigError);
    try {
        cfg.finish();
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
    }
}

TEST_CASE("missing required keys are reported") {
    Config cfg = Config::from_string("");
    CHECK_THROWS_AS(cfg.get_string("required"), ConfigError);
    CHECK(cfg.get_string("optional", "dflt") == "dflt");
    CHECK(cfg.get_double("opt2", 2.5) == 2.5);
}

TEST_CASE("overrides and hashing") {
    Config a = Config::from_string("b = 2\na = 1\n");
    Config b = Config::from_string("a = 1\nb = 2\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    b.set("a", "9");
    CHECK(a.hash() != b.hash());
}
