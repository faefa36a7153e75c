#pragma once

#include <algorithm>
#include <cctype>
#include <string>

#include <nlohmann/json.hpp>

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/types.hpp"

namespace hdlscale {

using json = nlohmann::json;

inline constexpr int kSampleSchemaVersion = 1;

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

inline std::optional<std::string> get_opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

inline void put_opt(json& j, const char* key, const std::optional<std::string>& v) {
  if (v) j[key] = *v;
}

}  // namespace detail

// ---- Problem (also the JSONL suite record) ----

inline json to_json(const Problem& p) {
  json j{{"id", p.id},
         {"spec_text", p.spec_text},
         {"testbench_source", p.testbench_source},
         {"tags", p.tags},
         {"suite", p.suite}};
  detail::put_opt(j, "ref_code", p.ref_code);
  detail::put_opt(j, "pass_regex", p.pass_regex);
  detail::put_opt(j, "fail_regex", p.fail_regex);
  return j;
}

inline Problem problem_from_json(const json& j) {
  Problem p;
  p.id = detail::get_or<std::string>(j, "id", "");
  p.spec_text = detail::get_or<std::string>(j, "spec_text", "");
  p.testbench_source = detail::get_or<std::string>(j, "testbench_source", "");
  p.ref_code = detail::get_opt_string(j, "ref_code");
  p.tags = detail::get_or<std::set<std::string>>(j, "tags", {});
  p.suite = detail::get_or<std::string>(j, "suite", "");
  p.pass_regex = detail::get_opt_string(j, "pass_regex");
  p.fail_regex = detail::get_opt_string(j, "fail_regex");
  return p;
}

// ---- Sample ----

inline json to_json(const GenerationParams& g) {
  return json{{"model_id", g.model_id},
              {"temperature", g.temperature},
              {"top_p", g.top_p},
              {"max_output_tokens", g.max_output_tokens},
              {"provider_profile", g.provider_profile}};
}

inline GenerationParams params_from_json(const json& j) {
  GenerationParams g;
  g.model_id = j.at("model_id").get<std::string>();
  g.temperature = j.at("temperature").get<double>();
  g.top_p = j.at("top_p").get<double>();
  g.max_output_tokens = j.at("max_output_tokens").get<int>();
  g.provider_profile = j.at("provider_profile").get<std::string>();
  return g;
}

inline json to_json(const Sample& s) {
  json j{{"schema_version", kSampleSchemaVersion},
         {"problem_id", s.problem_id},
         {"index", s.index},
         {"raw_response", s.raw_response},
         {"extracted_code", s.extracted_code ? json(*s.extracted_code) : json(nullptr)},
         {"verdict", {{"kind", to_string(s.verdict.kind)}, {"detail", s.verdict.detail}}},
         {"usage",
          {{"input_tokens", s.usage.input_tokens}, {"output_tokens", s.usage.output_tokens}}},
         {"latency_ms", s.latency_ms},
         {"params", to_json(s.params)},
         {"created_at", format_timestamp(s.created_at)}};
  return j;
}

inline Sample sample_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kSampleSchemaVersion)
    throw Error(Errc::ConfigMismatch, "unsupported sample schema version");
  Sample s;
  s.problem_id = j.at("problem_id").get<std::string>();
  s.index = j.at("index").get<int>();
  s.raw_response = j.at("raw_response").get<std::string>();
  s.extracted_code = detail::get_opt_string(j, "extracted_code");
  s.verdict.kind = verdict_kind_from_string(j.at("verdict").at("kind").get<std::string>());
  s.verdict.detail = j.at("verdict").at("detail").get<std::string>();
  s.usage.input_tokens = j.at("usage").at("input_tokens").get<std::uint64_t>();
  s.usage.output_tokens = j.at("usage").at("output_tokens").get<std::uint64_t>();
  s.latency_ms = j.at("latency_ms").get<std::int64_t>();
  s.params = params_from_json(j.at("params"));
  s.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  return s;
}

// ---- CampaignConfig snapshot ----

inline json to_json(const ProviderProfile& p) {
  return json{{"name", p.name},
              {"base_url", p.base_url},
              {"auth_env_var", p.auth_env_var},
              {"temperature_min", p.temperature_min},
              {"temperature_max", p.temperature_max},
              {"request_timeout_s", p.request_timeout_s},
              {"max_retries", p.max_retries},
              {"retry_base_delay_ms", p.retry_base_delay_ms},
              {"extra_body_json", p.extra_body_json},
              {"omit_fields", p.omit_fields}};
}

inline ProviderProfile provider_from_json(const json& j) {
  ProviderProfile p;
  p.name = j.at("name").get<std::string>();
  p.base_url = j.at("base_url").get<std::string>();
  p.auth_env_var = j.at("auth_env_var").get<std::string>();
  p.temperature_min = j.at("temperature_min").get<double>();
  p.temperature_max = j.at("temperature_max").get<double>();
  p.request_timeout_s = j.at("request_timeout_s").get<int>();
  p.max_retries = j.at("max_retries").get<int>();
  p.retry_base_delay_ms = j.at("retry_base_delay_ms").get<int>();
  p.extra_body_json = j.at("extra_body_json").get<std::string>();
  p.omit_fields = j.at("omit_fields").get<std::vector<std::string>>();
  return p;
}

inline json to_json(const SimProfile& p) {
  return json{{"name", p.name},
              {"compile_cmd", p.compile_cmd},
              {"run_cmd", p.run_cmd},
              {"default_pass_regex", p.default_pass_regex},
              {"default_fail_regex", p.default_fail_regex},
              {"timeout_s", p.timeout_s}};
}

inline SimProfile sim_profile_from_json(const json& j) {
  SimProfile p;
  p.name = j.at("name").get<std::string>();
  p.compile_cmd = j.at("compile_cmd").get<std::vector<std::string>>();
  p.run_cmd = j.at("run_cmd").get<std::vector<std::string>>();
  p.default_pass_regex = j.at("default_pass_regex").get<std::string>();
  p.default_fail_regex = j.at("default_fail_regex").get<std::string>();
  p.timeout_s = j.at("timeout_s").get<int>();
  return p;
}

inline json to_json(const CampaignConfig& c) {
  json providers = json::object();
  for (const auto& [name, p] : c.providers) providers[name] = to_json(p);
  json sims = json::object();
  for (const auto& [name, p] : c.sim_profiles) sims[name] = to_json(p);
  json pricing = json::object();
  for (const auto& [model, price] : c.pricing)
    pricing[model] = {{"usd_per_1m_input", price.usd_per_1m_input},
                      {"usd_per_1m_output", price.usd_per_1m_output}};
  return json{
      {"suite_path", c.suite_path.string()},
      {"params", to_json(c.params)},
      {"max_samples", c.max_samples ? json(*c.max_samples) : json(nullptr)},
      {"stop_mode", c.stop_mode ? json(std::string(to_string(*c.stop_mode))) : json(nullptr)},
      {"gen_concurrency", c.gen_concurrency},
      {"sim_workers", c.sim_workers},
      {"queue_capacity", c.queue_capacity},
      {"sim_profile", c.sim_profile},
      {"sim_timeout_s", c.sim_timeout_s},
      {"output_dir", c.output_dir.string()},
      {"seed", c.seed},
      {"mock", c.mock},
      {"debug_keep_failed", c.debug_keep_failed},
      {"progress_interval_s", c.progress_interval_s},
      {"prompt_version", c.prompt_version},
      {"providers", providers},
      {"sim_profiles", sims},
      {"pricing", pricing},
      {"mock_settings",
       {{"pass_prob", c.mock_settings.pass_prob},
        {"temperature_gain", c.mock_settings.temperature_gain},
        {"variants_per_temperature", c.mock_settings.variants_per_temperature},
        {"delay_ms", c.mock_settings.delay_ms}}},
      {"report",
       {{"checkpoints", c.report.checkpoints},
        {"discount_factor", c.report.discount_factor},
        {"normalize_samples", c.report.normalize_samples}}}};
}

inline StopMode stop_mode_from_string(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  std::erase(s, '_');
  std::erase(s, '-');
  if (s == "earlystop") return StopMode::EarlyStop;
  if (s == "fixedn") return StopMode::FixedN;
  throw Error(Errc::InvalidConfig, "unknown stop mode '" + s + "'");
}

inline CampaignConfig config_from_json(const json& j) {
  CampaignConfig c;
  c.suite_path = j.at("suite_path").get<std::string>();
  c.params = params_from_json(j.at("params"));
  if (!j.at("max_samples").is_null()) c.max_samples = j.at("max_samples").get<int>();
  if (!j.at("stop_mode").is_null())
    c.stop_mode = stop_mode_from_string(j.at("stop_mode").get<std::string>());
  c.gen_concurrency = j.at("gen_concurrency").get<int>();
  c.sim_workers = j.at("sim_workers").get<int>();
  c.queue_capacity = j.at("queue_capacity").get<int>();
  c.sim_profile = j.at("sim_profile").get<std::string>();
  c.sim_timeout_s = j.at("sim_timeout_s").get<int>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.mock = j.at("mock").get<bool>();
  c.debug_keep_failed = j.at("debug_keep_failed").get<bool>();
  c.progress_interval_s = j.at("progress_interval_s").get<int>();
  c.prompt_version = j.at("prompt_version").get<std::string>();
  for (const auto& [name, p] : j.at("providers").items()) c.providers[name] = provider_from_json(p);
  for (const auto& [name, p] : j.at("sim_profiles").items())
    c.sim_profiles[name] = sim_profile_from_json(p);
  for (const auto& [model, p] : j.at("pricing").items())
    c.pricing[model] = Price{p.at("usd_per_1m_input").get<double>(),
                             p.at("usd_per_1m_output").get<double>()};
  const auto& m = j.at("mock_settings");
  c.mock_settings.pass_prob = m.at("pass_prob").get<double>();
  c.mock_settings.temperature_gain = m.at("temperature_gain").get<double>();
  c.mock_settings.variants_per_temperature = m.at("variants_per_temperature").get<double>();
  c.mock_settings.delay_ms = m.at("delay_ms").get<int>();
  const auto& r = j.at("report");
  c.report.checkpoints = r.at("checkpoints").get<std::vector<int>>();
  c.report.discount_factor = r.at("discount_factor").get<double>();
  c.report.normalize_samples = r.at("normalize_samples").get<int>();
  return c;
}

}  // namespace hdlscale
