#include <doctest.h>

#include <fstream>

#include "depthpatch/config.hpp"
#include "support/helpers.hpp"

using namespace depthpatch;
using nlohmann::json;
using testsupport::TmpDir;

TEST_CASE("omitted lambda defaults to 1.0") {
  const RunConfig cfg = parse_run_config(json{{"seed", 1}});
  CHECK(cfg.lambda == 1.0);
  CHECK(cfg.target_ratio == doctest::Approx(1.0 / 9.0));
  CHECK(cfg.iterations == 5000);
}

TEST_CASE("target_ratio outside (0,1] is a range error") {
  try {
    parse_run_config(json{{"seed", 1}, {"target_ratio", 1.5}});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::out_of_range);
  }
  CHECK_THROWS_AS(parse_run_config(json{{"seed", 1}, {"target_ratio", 0.0}}), Error);
}

TEST_CASE("empty config file demands an explicit seed") {
  TmpDir tmp("cfg");
  { std::ofstream f(tmp.path("empty.json")); f << "  \n"; }
  try {
    load_run_config(tmp.path("empty.json"));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_required);
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  try {
    parse_run_config(json{{"seed", 1}, {"lambada", 2.0}});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_key);
    CHECK(std::string(e.what()).find("lambada") != std::string::npos);
  }
  try {
    parse_run_config(json{{"seed", 1}, {"eot", {{"min_distance_m", 5}, {"warp", 1}}}});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_key);
    CHECK(std::string(e.what()).find("eot.warp") != std::string::npos);
  }
}

TEST_CASE("snapshot is fully resolved and round-trips") {
  const RunConfig cfg = parse_run_config(json{{"seed", 42}, {"lambda", 0.5}});
  const json snap = config_to_json(cfg);
  CHECK(snap.contains("optimizer"));
  CHECK(snap["optimizer"]["lbfgs_history"] == 10);
  CHECK(snap["eot"]["min_distance_m"] == 7.0);

  const RunConfig again = parse_run_config(snap);
  CHECK(config_to_json(again) == snap);
}

TEST_CASE("overrides are validated against the schema") {
  json j{{"seed", 1}};
  apply_override(j, "eot.rotation_deg=2.5");
  apply_override(j, "model.backend=toy");
  const RunConfig cfg = parse_run_config(j);
  CHECK(cfg.eot.rotation_deg == 2.5);

  json bad{{"seed", 1}};
  apply_override(bad, "eot.bogus=1");
  CHECK_THROWS_AS(parse_run_config(bad), Error);
}

TEST_CASE("defense sweep parameters obey the documented ranges") {
  CHECK_THROWS_AS(parse_run_config(json{{"seed", 1}, {"defense", {{"jpeg_quality", {95}}}}}),
                  Error);
  CHECK_THROWS_AS(parse_run_config(json{{"seed", 1}, {"defense", {{"median_kernels", {4}}}}}),
                  Error);
  CHECK_THROWS_AS(parse_run_config(json{{"seed", 1}, {"defense", {{"noise_sigmas", {0.5}}}}}),
                  Error);
}

TEST_CASE("attack path requirements") {
  RunConfig cfg = parse_run_config(json{{"seed", 1}});
  try {
    require_attack_paths(cfg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_required);
  }
}
