#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace hdlscale;
using hdlscale::test::TempDir;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no hdlscale::Error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Error, MessageCarriesCode) {
  Error e(Errc::DuplicateId, "x twice");
  EXPECT_EQ(e.code(), Errc::DuplicateId);
  EXPECT_NE(std::string(e.what()).find("DuplicateId"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("x twice"), std::string::npos);
}

TEST(Time, FormatParseRoundTrip) {
  Timestamp t{std::chrono::milliseconds(1'700'000'123'456)};
  const std::string s = format_timestamp(t);
  EXPECT_EQ(s, "2023-11-14T22:15:23.456Z");
  EXPECT_EQ(parse_timestamp(s), t);
}

TEST(JsonIo, SampleRoundTrip) {
  Sample s;
  s.problem_id = "p";
  s.index = 7;
  s.raw_response = "text \"quoted\"\n```verilog\nmodule m; endmodule\n```";
  s.extracted_code = "module m; endmodule";
  s.verdict = {VerdictKind::CompileError, "line 3: syntax error"};
  s.usage = {123, 456};
  s.latency_ms = 42;
  s.params.model_id = "gpt";
  s.params.temperature = 0.7;
  s.created_at = Timestamp{std::chrono::milliseconds(1'000)};
  json j = to_json(s);
  EXPECT_EQ(j.at("schema_version"), kSampleSchemaVersion);
  EXPECT_EQ(sample_from_json(json::parse(j.dump())), s);
}

TEST(JsonIo, ConfigRoundTrip) {
  CampaignConfig c = test::mock_config("/tmp/x", 9, StopMode::FixedN);
  c.pricing["mock"] = {0.15, 0.6};
  c.providers["p"].name = "p";
  c.providers["p"].omit_fields = {"top_p"};
  c.sim_profiles["s"] = mock_sim_profile();
  c.report.checkpoints = {1, 5};
  EXPECT_EQ(config_from_json(json::parse(to_json(c).dump())), c);
}

TEST(JsonIo, StopModeSpellings) {
  EXPECT_EQ(stop_mode_from_string("fixedn"), StopMode::FixedN);
  EXPECT_EQ(stop_mode_from_string("fixed_n"), StopMode::FixedN);
  EXPECT_EQ(stop_mode_from_string("EarlyStop"), StopMode::EarlyStop);
  EXPECT_EQ(code_of([] { stop_mode_from_string("never"); }), Errc::InvalidConfig);
}

TEST(Toml, ScalarsArraysAndSections) {
  auto t = toml::parse(R"(
# comment
top = 1
[a]
s = "x # not a comment"
lit = 'c:\path'
f = 1.5
neg = -3
b = true
arr = [1, 2,
       3]   # trailing
[pricing."gpt-4o"]
input_per_1m = 2.5
)");
  EXPECT_EQ(t.at("top").integer, 1);
  EXPECT_EQ(t.at("a.s").str, "x # not a comment");
  EXPECT_EQ(t.at("a.lit").str, "c:\\path");
  EXPECT_DOUBLE_EQ(t.at("a.f").real, 1.5);
  EXPECT_EQ(t.at("a.neg").integer, -3);
  EXPECT_TRUE(t.at("a.b").boolean);
  ASSERT_EQ(t.at("a.arr").items.size(), 3u);
  EXPECT_EQ(t.at("a.arr").items[2].integer, 3);
  EXPECT_DOUBLE_EQ(t.at("pricing.gpt-4o.input_per_1m").as_double(), 2.5);
}

TEST(Toml, RejectsMalformed) {
  EXPECT_EQ(code_of([] { toml::parse("a = "); }), Errc::InvalidConfig);
  EXPECT_EQ(code_of([] { toml::parse("[a\nb = 1"); }), Errc::InvalidConfig);
  EXPECT_EQ(code_of([] { toml::parse("a = 1\na = 2"); }), Errc::InvalidConfig);
}

TEST(ConfigFile, ReadsSectionsAndResolvesPaths) {
  auto c = config_from_toml(R"(
[campaign]
suite = "suite"
output_dir = "/abs/out"
max_samples = 32
stop_mode = "fixed_n"
seed = 5
[generation]
model = "gpt-4o-mini"
temperature = 0.4
[provider.local]
base_url = "http://127.0.0.1:8000/v1"
omit_fields = ["top_p"]
[simulator]
profile = "icarus"
timeout_s = 20
[pricing."gpt-4o-mini"]
input_per_1m = 0.15
output_per_1m = 0.6
[report]
checkpoints = [1, 8]
)",
                            "/base");
  EXPECT_EQ(c.suite_path, fs::path("/base/suite"));
  EXPECT_EQ(c.output_dir, fs::path("/abs/out"));
  EXPECT_EQ(c.max_samples, 32);
  EXPECT_EQ(c.stop_mode, StopMode::FixedN);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.params.model_id, "gpt-4o-mini");
  EXPECT_DOUBLE_EQ(c.params.temperature, 0.4);
  EXPECT_EQ(c.providers.at("local").omit_fields, std::vector<std::string>{"top_p"});
  EXPECT_EQ(c.sim_timeout_s, 20);
  EXPECT_DOUBLE_EQ(c.pricing.at("gpt-4o-mini").usd_per_1m_output, 0.6);
  EXPECT_EQ(c.report.checkpoints, (std::vector<int>{1, 8}));
}

TEST(ConfigFile, UnknownKeysAreErrors) {
  EXPECT_EQ(code_of([] { config_from_toml("[campaign]\nmax_sample = 3\n", "/"); }), Errc::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_toml("[campaign]\nmax_samples = \"3\"\n", "/"); }), Errc::InvalidConfig);
}

TEST(ConfigFile, SweepKeysGoToExtra) {
  toml::Table extra;
  config_from_toml("[sweep]\ntemperatures = [0.2, 1.0]\n", "/", &extra);
  ASSERT_TRUE(extra.count("sweep.temperatures"));
  EXPECT_EQ(extra.at("sweep.temperatures").items.size(), 2u);
}

TEST(ConfigFile, MissingFileNamesPath) {
  try {
    load_config_file("/nonexistent/camp.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/camp.toml"), std::string::npos);
  }
}

TEST(Config, DefaultsFilledByValidation) {
  CampaignConfig c;
  c.params.model_id = "m";
  auto v = validate_config(c, {});
  EXPECT_EQ(v.max_samples, 512);
  EXPECT_EQ(v.stop_mode, StopMode::EarlyStop);
}

TEST(Config, RangeChecks) {
  CampaignConfig c;
  c.params.model_id = "m";
  auto bad = [&](auto mutate, Errc want) {
    CampaignConfig x = c;
    mutate(x);
    EXPECT_EQ(code_of([&] { validate_config(x, {}); }), want);
  };
  bad([](CampaignConfig& x) { x.max_samples = 0; }, Errc::InvalidConfig);
  bad([](CampaignConfig& x) { x.queue_capacity = 0; }, Errc::InvalidConfig);
  bad([](CampaignConfig& x) { x.gen_concurrency = 0; }, Errc::InvalidConfig);
  bad([](CampaignConfig& x) { x.params.temperature = 2.5; }, Errc::TemperatureOutOfRange);
  bad([](CampaignConfig& x) { x.params.temperature = -0.1; }, Errc::TemperatureOutOfRange);
  bad([](CampaignConfig& x) { x.params.provider_profile = "nope"; }, Errc::InvalidConfig);
  bad([](CampaignConfig& x) { x.sim_profile = "nope"; }, Errc::InvalidConfig);
}

TEST(Config, PricingCoverage) {
  CampaignConfig c;
  c.params.model_id = "m";
  std::vector<std::string> warnings;
  validate_config(c, {}, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(code_of([&] { validate_config(c, {{"other", {1, 1}}}); }), Errc::UnknownModelForPricing);
}

TEST(Config, ProviderRangeIsPerProfile) {
  CampaignConfig c;
  c.params.model_id = "m";
  c.params.provider_profile = "narrow";
  c.providers["narrow"].name = "narrow";
  c.providers["narrow"].temperature_max = 1.0;
  c.params.temperature = 1.5;
  EXPECT_EQ(code_of([&] { validate_config(c, {}); }), Errc::TemperatureOutOfRange);
}

TEST(SimProfile, PlaceholdersValidated) {
  SimProfile p = icarus_sim_profile();
  p.run_cmd = {"vvp", "{code}"};
  EXPECT_EQ(code_of([&] { validate_sim_profile(p); }), Errc::InvalidConfig);
  p = icarus_sim_profile();
  p.compile_cmd.push_back("{nope}");
  EXPECT_EQ(code_of([&] { validate_sim_profile(p); }), Errc::InvalidConfig);
  EXPECT_NO_THROW(validate_sim_profile(icarus_sim_profile()));
  EXPECT_NO_THROW(validate_sim_profile(mock_sim_profile()));
}

TEST(SimProfile, IcarusSentinels) {
  auto p = icarus_sim_profile();
  auto pass = compile_sentinel_regex(p.default_pass_regex);
  auto fail = compile_sentinel_regex(p.default_fail_regex);
  EXPECT_TRUE(std::regex_search("Mismatches: 0 in 100 samples", pass));
  EXPECT_FALSE(std::regex_search("Mismatches: 0 in 100 samples", fail));
  EXPECT_TRUE(std::regex_search("Mismatches: 12 in 100 samples", fail));
  EXPECT_TRUE(std::regex_search("ALL TESTS PASSED", pass));
  EXPECT_TRUE(std::regex_search("ERROR: bad", fail));
}

TEST(Suite, LoadsDirectory) {
  TempDir tmp;
  write(tmp / "s/b/spec.md", "spec b");
  write(tmp / "s/b/testbench.v", "tb b");
  write(tmp / "s/a/spec.md", "spec a");
  write(tmp / "s/a/testbench.v", "tb a");
  write(tmp / "s/a/ref.v", "module a; endmodule");
  write(tmp / "s/a/meta.json", R"({"tags": ["math"], "pass_regex": "OK"})");
  auto suite = load_suite(tmp / "s");
  ASSERT_EQ(suite.size(), 2u);
  EXPECT_EQ(suite[0].id, "a");
  EXPECT_EQ(suite[0].suite, "s");
  EXPECT_TRUE(suite[0].has_tag("math"));
  EXPECT_EQ(suite[0].ref_code, "module a; endmodule");
  EXPECT_EQ(suite[0].pass_regex, "OK");
  EXPECT_FALSE(suite[1].ref_code);
}

TEST(Suite, Errors) {
  TempDir tmp;
  write(tmp / "nospec/a/testbench.v", "tb");
  EXPECT_EQ(code_of([&] { load_suite(tmp / "nospec"); }), Errc::MissingSpec);
  write(tmp / "notb/a/spec.md", "s");
  EXPECT_EQ(code_of([&] { load_suite(tmp / "notb"); }), Errc::MissingTestbench);
  write(tmp / "dep/a/spec.md", "s");
  write(tmp / "dep/a/testbench.v", "tb");
  write(tmp / "dep/a/meta.json", R"({"dependencies": ["adder"]})");
  EXPECT_EQ(code_of([&] { load_suite(tmp / "dep"); }), Errc::ExternalDependency);
  write(tmp / "dup.jsonl",
        "{\"id\":\"x\",\"spec_text\":\"s\",\"testbench_source\":\"t\"}\n"
        "{\"id\":\"x\",\"spec_text\":\"s\",\"testbench_source\":\"t\"}\n");
  try {
    load_suite(tmp / "dup.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
    EXPECT_NE(std::string(e.what()).find("dup.jsonl:1 "), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("dup.jsonl:2)"), std::string::npos);
  }
}

TEST(Suite, JsonlRoundTrip) {
  TempDir tmp;
  std::vector<Problem> suite{test::mock_problem("a", {"math"}, "module a; endmodule"), test::mock_problem("b")};
  save_suite_jsonl(suite, tmp / "s.jsonl");
  EXPECT_EQ(load_suite(tmp / "s.jsonl"), suite);
}

TEST(Prompt, PinnedAndProblemTextOnly) {
  auto p = test::mock_problem("a", {}, "module secret_ref; endmodule");
  const std::string prompt = build_prompt(p);
  EXPECT_EQ(prompt.find(prompt_preamble("v1")), 0u);
  EXPECT_NE(prompt.find(p.spec_text), std::string::npos);
  EXPECT_EQ(prompt.find("secret_ref"), std::string::npos);
  EXPECT_EQ(prompt.find("MOCK_MARKER"), std::string::npos);
  EXPECT_EQ(code_of([&] { build_prompt(p, "v9"); }), Errc::InvalidConfig);
}

TEST(Prompt, UnicodePreservedVerbatim) {
  auto p = test::mock_problem("u");
  p.spec_text = "Compute y = a \xe2\x8a\x95 b (XOR), \xc2\xb5s timing.\n";
  EXPECT_NE(build_prompt(p).find(p.spec_text), std::string::npos);
}

TEST(Prompt, ProblemsDifferOnlyInProblemText) {
  auto a = test::mock_problem("a"), b = test::mock_problem("b");
  a.spec_text = "Build a 2:1 mux.\n";
  b.spec_text = "Build a full adder with carry out.\n";
  const std::string pa = build_prompt(a), pb = build_prompt(b);
  const auto at = pa.find(a.spec_text), bt = pb.find(b.spec_text);
  ASSERT_NE(at, std::string::npos);
  ASSERT_EQ(at, bt);
  EXPECT_EQ(pa.substr(0, at), pb.substr(0, bt));
  EXPECT_EQ(pa.substr(at + a.spec_text.size()), pb.substr(bt + b.spec_text.size()));
}

TEST(Extract, IdempotentOnRefencedOutput) {
  for (const std::string raw :
       {"```verilog\nmodule m(input a, output y);\n  assign y = a;\nendmodule\n```",
        "text module q; endmodule more", "````\nmodule r; // ```\nendmodule\n````\n"}) {
    const std::string once = extract_code(raw);
    EXPECT_EQ(extract_code("```verilog\n" + once + "\n```"), once);
    EXPECT_EQ(extract_code(once), once);
  }
}

TEST(Extract, FencedBlock) {
  EXPECT_EQ(extract_code("Here:\n```verilog\nmodule m(input a);\nendmodule\n```\nDone."),
            "module m(input a);\nendmodule");
}

TEST(Extract, PrefersLastEligibleBlock) {
  const std::string raw =
      "```verilog\nmodule first; endmodule\n```\ntext\n```systemverilog\nmodule second; endmodule\n```\n"
      "```python\nprint('module x endmodule')\n```\n";
  EXPECT_EQ(extract_code(raw), "module second; endmodule");
}

TEST(Extract, SkipsBlocksWithoutModule) {
  const std::string raw = "```verilog\nmodule good; endmodule\n```\n```\n// usage notes\n```\n";
  EXPECT_EQ(extract_code(raw), "module good; endmodule");
}

TEST(Extract, UnfencedFallback) {
  EXPECT_EQ(extract_code("The answer is module m; assign y = 1; endmodule and that's it"),
            "module m; assign y = 1; endmodule");
}

TEST(Extract, LongerFenceContainsBackticks) {
  const std::string raw = "````verilog\nmodule m; // ``` inside\nendmodule\n````\n";
  EXPECT_EQ(extract_code(raw), "module m; // ``` inside\nendmodule");
}

TEST(Extract, NoModuleIsExtractError) {
  EXPECT_EQ(code_of([] { extract_code("I cannot help with that."); }), Errc::ExtractError);
  EXPECT_EQ(code_of([] { extract_code("```verilog\nmodule m;\n```"); }), Errc::ExtractError);
  EXPECT_EQ(code_of([] { extract_code(""); }), Errc::ExtractError);
}

TEST(Channel, BoundedPushBlocksUntilPop) {
  Channel<int> ch(1);
  ASSERT_TRUE(ch.push(1));
  std::atomic<bool> pushed{false};
  std::thread t([&] {
    ch.push(2);
    pushed = true;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  EXPECT_FALSE(pushed);
  EXPECT_EQ(ch.pop(), 1);
  t.join();
  EXPECT_TRUE(pushed);
  EXPECT_EQ(ch.pop(), 2);
}

TEST(Channel, CloseDrainsThenEnds) {
  Channel<int> ch;
  ch.push(1);
  ch.close();
  EXPECT_FALSE(ch.push(2));
  EXPECT_EQ(ch.pop(), 1);
  EXPECT_EQ(ch.pop(), std::nullopt);
  EXPECT_EQ(ch.pop_for(std::chrono::milliseconds(1)), std::nullopt);
}
