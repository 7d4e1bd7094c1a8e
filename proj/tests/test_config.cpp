#include <cstdlib>
#include <stdexcept>

#include "doctest.h"
#include "sepvar/config.hpp"

using namespace sep;

TEST_CASE("table parses sections, comments and quoted strings") {
  ConfigTable t = ConfigTable::parse_text(
      "# leading comment\n"
      "rho = 0.4            # trailing comment\n"
      "[run]\n"
      "trials = 250\n"
      "label = \"alpha # not a comment\"\n"
      "\n"
      "[grid]\n"
      "lambdas = [1, 0.1]\n");
  CHECK(t.get_double("rho", 0) == 0.4);
  CHECK(t.get_int("run.trials", 0) == 250);
  CHECK(t.get_string("run.label", "") == "alpha # not a comment");
  const auto ls = t.get_doubles("grid.lambdas", {});
  REQUIRE(ls.size() == 2);
  CHECK(ls[1] == 0.1);
}

TEST_CASE("table rejects malformed input") {
  CHECK_THROWS_AS(ConfigTable::parse_text("rho 0.4\n"), std::invalid_argument);
  CHECK_THROWS_AS(ConfigTable::parse_text("a = 1\na = 2\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConfigTable::parse_text("bad key! = 1\n"),
                  std::invalid_argument);
  ConfigTable t = ConfigTable::parse_text("x = not-json\nn = 1.5\n");
  CHECK_THROWS_AS(t.get_double("x", 0), std::invalid_argument);
  CHECK_THROWS_AS(t.get_int("n", 0), std::invalid_argument);
}

TEST_CASE("overrides replace file values") {
  ConfigTable t = ConfigTable::parse_text("seed = 1\n");
  t.override_value("seed", "42");
  t.override_value("extra", "[1,2]");
  CHECK(t.get_u64("seed", 0) == 42);
  CHECK(t.get_doubles("extra", {}).size() == 2);
}

TEST_CASE("experiment config resolves defaults per dimension") {
  ConfigTable t1 = ConfigTable::parse_text("rates = [[1,0,1.0]]\n");
  ExperimentConfig c1 = ExperimentConfig::load(t1);
  CHECK(c1.dimension == 1);
  CHECK(c1.resolved_res_single() == 1024);
  CHECK(c1.resolved_res_double() == 64);

  ConfigTable t2 = ConfigTable::parse_text(
      "dimension = 2\nrates = [[1,0,1.0],[0,1,0.5],[0,-1,0.5]]\n");
  ExperimentConfig c2 = ExperimentConfig::load(t2);
  CHECK(c2.resolved_res_single() == 256);
  CHECK(c2.jump_rates().dim == 2);
}

TEST_CASE("experiment config validates before any compute") {
  auto load = [](const std::string& text) {
    ConfigTable t = ConfigTable::parse_text(text);
    return ExperimentConfig::load(t);
  };
  CHECK_THROWS_WITH_AS(load("rates = []\n"),
                       "rate list is empty; nothing to simulate",
                       std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0]]\nrho = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0]]\nrho = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0],[1,0,0.5]]\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1.5,0,1.0]]\n"), std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0]]\ndimension = 3\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0]]\ntimes = [1, -2]\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load("rates = [[1,0,1.0]]\ntilt = [1]\n"),
                  std::invalid_argument);
}

TEST_CASE("output dir falls back to the environment variable") {
  setenv(kOutputDirEnv, "/tmp/sepvar-env-test", 1);
  ConfigTable t = ConfigTable::parse_text("rates = [[1,0,1.0]]\n");
  ExperimentConfig c = ExperimentConfig::load(t);
  CHECK(c.output_dir == "/tmp/sepvar-env-test");
  unsetenv(kOutputDirEnv);

  ConfigTable t2 =
      ConfigTable::parse_text("rates = [[1,0,1.0]]\noutput_dir = \"/tmp/x\"\n");
  setenv(kOutputDirEnv, "/tmp/should-lose", 1);
  CHECK(ExperimentConfig::load(t2).output_dir == "/tmp/x");
  unsetenv(kOutputDirEnv);
}
