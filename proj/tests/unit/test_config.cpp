#include "doctest.h"

#include <cmath>

#include "dln/config.hpp"

using namespace dln;

TEST_CASE("minimal config takes the defaults") {
  const ExperimentConfig c = parse_config("[experiment]\nkind = flow\n");
  CHECK(c.kind == ExperimentKind::kFlow);
  CHECK(c.d == 2);
  CHECK(c.depth == 3);
  CHECK(c.flow.dt == doctest::Approx(1e-3));
  CHECK(c.rankRelTol == doctest::Approx(1e-6));
  CHECK(std::isinf(c.flow.beta));
}

TEST_CASE("kind names round-trip") {
  for (ExperimentKind k : {ExperimentKind::kFlow, ExperimentKind::kRle, ExperimentKind::kDyson,
                           ExperimentKind::kSphere, ExperimentKind::kComplete,
                           ExperimentKind::kAudit, ExperimentKind::kEntropyMap})
    CHECK(parse_kind(kind_name(k)) == k);
  CHECK(kind_name(ExperimentKind::kEntropyMap) == "entropy-map");
  CHECK_THROWS_AS(parse_kind("walk"), ConfigError);
}

TEST_CASE("full config parses and echoes back to itself") {
  const std::string text =
      "[experiment]\nkind = complete\nd = 2\nN = 4\nseed = 18446744073709551615\n"
      "[loss]\ntype = completion\nentries = 1,1,1; 2,2,1; 1,2,0.25\n"
      "[flow]\nlevel = reduced\ndt = 0.02\nt_end = 50\nstop_tolerance = 1e-8\n"
      "[init]\nscale = 0.1\n"
      "[complete]\npaths = 17\n"
      "[output]\nrank_rel_tol = 1e-3\ndir = somewhere\n";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.depth == 4);
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.init.seed == c.seed);
  CHECK(c.loss.mask.size() == 3);
  CHECK(c.flowLevel == FlowLevel::kReduced);
  CHECK(c.completion.paths == 17);
  CHECK(c.outputDir == "somewhere");

  const std::string echo = echo_config(c);
  const ExperimentConfig back = parse_config(echo);
  CHECK(echo_config(back) == echo);
  CHECK(back.outputDir.empty());
  CHECK(back.flow.dt == c.flow.dt);
  CHECK(back.completion.paths == 17);
}

TEST_CASE("echo of every kind is stable") {
  for (const char* kind : {"flow", "rle", "dyson", "sphere", "complete", "audit", "entropy-map"}) {
    const ExperimentConfig c = parse_config(std::string("[experiment]\nkind = ") + kind + "\n");
    CHECK(echo_config(parse_config(echo_config(c))) == echo_config(c));
  }
}

TEST_CASE("infinite beta and dyson initial positions") {
  const ExperimentConfig c = parse_config(
      "[experiment]\nkind = dyson\nd = 3\n[sde]\nbeta = inf\n[dyson]\ninitial = -1, 0, 2\n");
  CHECK(c.sde.noiseless());
  REQUIRE(c.dyson.initial.size() == 3);
  CHECK(c.dyson.initial(2) == 2.0);
  CHECK(parse_config(echo_config(c)).sde.noiseless());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config(""), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\n[flows]\ndt = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\nd = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\n[flow]\ndt = 1e-3x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\n[loss]\nentries = 0,1,1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\n[loss]\nentries = 3,1,1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = flow\n[flow]\ndt = -1\n"), ConfigError);
  CHECK_THROWS_AS(
      parse_config("[experiment]\nkind = flow\n[flow]\nlevel = reduced\n[init]\nmode = gaussian\n"),
      ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = dyson\n[dyson]\ninitial = 1, 0\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nkind = sphere\n[sde]\nbeta = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("seed override reaches every component") {
  ExperimentConfig c = parse_config("[experiment]\nkind = rle\nseed = 3\n");
  c.set_seed(99);
  CHECK(c.seed == 99);
  CHECK(c.sde.seed == 99);
  CHECK(c.init.seed == 99);
}
