#include <doctest.h>

#include <json.hpp>

#include "visaw/config.hpp"
#include "visaw/errors.hpp"

using namespace visaw;
using nlohmann::json;

TEST_CASE("defaults satisfy validate and round-trip through json") {
  RunConfig base;
  base.validate();
  RunConfig copy = RunConfig::from_json(base.to_json());
  CHECK(copy.to_json() == base.to_json());
  CHECK(copy.seed == base.seed);
  CHECK(copy.d_s == base.d_s);
  CHECK(copy.task == base.task);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    RunConfig::from_json(json{{"d_z", 4}});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("d_z") != std::string::npos);
  }
}

TEST_CASE("wrong types are rejected by key") {
  try {
    RunConfig::from_json(json{{"seed", "zero"}});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_json(json::array()), Error);
}

TEST_CASE("partial overrides keep the other defaults") {
  RunConfig c = RunConfig::from_json(json{{"m", 4}, {"task", "nli"}});
  CHECK(c.m == 4);
  CHECK(c.task == "nli");
  CHECK(c.d_s == RunConfig{}.d_s);
}

TEST_CASE("validate rejects inconsistent settings") {
  auto reject = [](void (*tweak)(RunConfig&)) {
    RunConfig c;
    tweak(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  reject([](RunConfig& c) { c.d = 0; });
  reject([](RunConfig& c) { c.heads = 3; });            // 64 % 3 != 0
  reject([](RunConfig& c) { c.fusion_heads = 5; });
  reject([](RunConfig& c) { c.alpha = -0.2; });
  reject([](RunConfig& c) { c.k_plus = 0; });
  reject([](RunConfig& c) { c.k_plus = 10; c.k_minus = 10; });  // 20 > 16 regions
  reject([](RunConfig& c) { c.lr = 0.0; });
  reject([](RunConfig& c) { c.adam_beta1 = 1.0; });
  reject([](RunConfig& c) { c.task = "summarize"; });
  reject([](RunConfig& c) { c.topics = 3; });
  reject([](RunConfig& c) { c.caption_topic_min = 0; });
  reject([](RunConfig& c) { c.caption_topic_max = 16; });       // > topic_vocab / 2
  reject([](RunConfig& c) { c.caption_ambig_max = 99; });
  reject([](RunConfig& c) { c.background_regions = 16; });
  reject([](RunConfig& c) { c.copy_len_max = 63; });            // + BOS/EOS > max_len
}

TEST_CASE("load reports missing files and parse failures") {
  CHECK_THROWS_AS(RunConfig::load("definitely_not_here.json"), Error);
}
