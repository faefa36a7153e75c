#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/json_io.hpp"
#include "hdlscale/core/suite.hpp"
#include "hdlscale/core/toml_lite.hpp"

namespace hdlscale {

namespace detail {

// Typed accessors over a flattened table that remember which keys were used,
// so unknown keys can be reported instead of silently ignored.
class ConfigReader {
 public:
  explicit ConfigReader(const toml::Table& table) : table_(table) {}

  const toml::Value* find(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void str(const std::string& key, std::string& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::String) bad(key, "a string");
      out = v->str;
    }
  }
  void path(const std::string& key, fs::path& out, const fs::path& base) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::String) bad(key, "a string");
      fs::path p(v->str);
      out = p.is_absolute() || base.empty() ? p : (base / p).lexically_normal();
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::Integer) bad(key, "an integer");
      out = static_cast<Int>(v->integer);
    }
  }
  void real(const std::string& key, double& out) {
    if (auto* v = find(key)) {
      if (!v->is_number()) bad(key, "a number");
      out = v->as_double();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::Bool) bad(key, "a boolean");
      out = v->boolean;
    }
  }
  void strings(const std::string& key, std::vector<std::string>& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::Array) bad(key, "an array of strings");
      out.clear();
      for (const auto& item : v->items) {
        if (item.kind != toml::Value::Kind::String) bad(key, "an array of strings");
        out.push_back(item.str);
      }
    }
  }
  void ints(const std::string& key, std::vector<int>& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::Array) bad(key, "an array of integers");
      out.clear();
      for (const auto& item : v->items) {
        if (item.kind != toml::Value::Kind::Integer) bad(key, "an array of integers");
        out.push_back(static_cast<int>(item.integer));
      }
    }
  }
  void reals(const std::string& key, std::vector<double>& out) {
    if (auto* v = find(key)) {
      if (v->kind != toml::Value::Kind::Array) bad(key, "an array of numbers");
      out.clear();
      for (const auto& item : v->items) {
        if (!item.is_number()) bad(key, "an array of numbers");
        out.push_back(item.as_double());
      }
    }
  }

  // Distinct names appearing as "<prefix>.<name>.<field>".
  std::set<std::string> children(const std::string& prefix) const {
    std::set<std::string> names;
    const std::string head = prefix + ".";
    for (const auto& [key, v] : table_) {
      if (!key.starts_with(head)) continue;
      auto rest = key.substr(head.size());
      auto dot = rest.rfind('.');
      if (dot != std::string::npos) names.insert(rest.substr(0, dot));
    }
    return names;
  }

  void reject_unknown() const {
    for (const auto& [key, v] : table_)
      if (!used_.count(key)) throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  }

 private:
  [[noreturn]] static void bad(const std::string& key, const char* what) {
    throw Error(Errc::InvalidConfig, "config key '" + key + "' must be " + what);
  }

  const toml::Table& table_;
  std::set<std::string> used_;
};

}  // namespace detail

// Extra sections that are not part of a campaign (e.g. sweep plans) are
// returned to the caller through `extra` when given.
inline CampaignConfig config_from_toml(std::string_view text, const fs::path& base_dir,
                                       toml::Table* extra = nullptr) {
  toml::Table table = toml::parse(text);
  if (extra) {
    for (auto it = table.begin(); it != table.end();) {
      if (it->first.starts_with("sweep.")) {
        extra->insert(*it);
        it = table.erase(it);
      } else {
        ++it;
      }
    }
  }
  detail::ConfigReader r(table);
  CampaignConfig c;

  r.path("campaign.suite", c.suite_path, base_dir);
  r.path("campaign.output_dir", c.output_dir, base_dir);
  int max_samples = 0;
  r.integer("campaign.max_samples", max_samples);
  if (r.find("campaign.max_samples")) c.max_samples = max_samples;
  std::string stop_mode;
  r.str("campaign.stop_mode", stop_mode);
  if (!stop_mode.empty()) c.stop_mode = stop_mode_from_string(stop_mode);
  r.integer("campaign.gen_concurrency", c.gen_concurrency);
  r.integer("campaign.sim_workers", c.sim_workers);
  r.integer("campaign.queue_capacity", c.queue_capacity);
  r.integer("campaign.seed", c.seed);
  r.boolean("campaign.mock", c.mock);
  r.boolean("campaign.debug_keep_failed", c.debug_keep_failed);
  r.integer("campaign.progress_interval_s", c.progress_interval_s);
  r.str("campaign.prompt_version", c.prompt_version);

  r.str("generation.model", c.params.model_id);
  r.real("generation.temperature", c.params.temperature);
  r.real("generation.top_p", c.params.top_p);
  r.integer("generation.max_output_tokens", c.params.max_output_tokens);
  r.str("generation.provider", c.params.provider_profile);

  for (const auto& name : r.children("provider")) {
    ProviderProfile p;
    p.name = name;
    const std::string k = "provider." + name + ".";
    r.str(k + "base_url", p.base_url);
    r.str(k + "auth_env_var", p.auth_env_var);
    r.real(k + "temperature_min", p.temperature_min);
    r.real(k + "temperature_max", p.temperature_max);
    r.integer(k + "request_timeout_s", p.request_timeout_s);
    r.integer(k + "max_retries", p.max_retries);
    r.integer(k + "retry_base_delay_ms", p.retry_base_delay_ms);
    r.str(k + "extra_body", p.extra_body_json);
    r.strings(k + "omit_fields", p.omit_fields);
    c.providers[name] = p;
  }

  r.str("simulator.profile", c.sim_profile);
  r.integer("simulator.timeout_s", c.sim_timeout_s);
  for (const auto& name : r.children("simulator")) {
    SimProfile p = name == "icarus" ? icarus_sim_profile() : SimProfile{};
    p.name = name;
    const std::string k = "simulator." + name + ".";
    r.strings(k + "compile_cmd", p.compile_cmd);
    r.strings(k + "run_cmd", p.run_cmd);
    r.str(k + "pass_regex", p.default_pass_regex);
    r.str(k + "fail_regex", p.default_fail_regex);
    r.integer(k + "timeout_s", p.timeout_s);
    c.sim_profiles[name] = p;
  }

  for (const auto& model : r.children("pricing")) {
    Price price;
    r.real("pricing." + model + ".input_per_1m", price.usd_per_1m_input);
    r.real("pricing." + model + ".output_per_1m", price.usd_per_1m_output);
    if (price.usd_per_1m_input < 0 || price.usd_per_1m_output < 0)
      throw Error(Errc::InvalidConfig, "negative price for model '" + model + "'");
    c.pricing[model] = price;
  }

  r.ints("report.checkpoints", c.report.checkpoints);
  r.real("report.discount_factor", c.report.discount_factor);
  r.integer("report.normalize_samples", c.report.normalize_samples);

  r.real("mock.pass_prob", c.mock_settings.pass_prob);
  r.real("mock.temperature_gain", c.mock_settings.temperature_gain);
  r.real("mock.variants_per_temperature", c.mock_settings.variants_per_temperature);
  r.integer("mock.delay_ms", c.mock_settings.delay_ms);

  r.reject_unknown();
  return c;
}

inline CampaignConfig load_config_file(const fs::path& path, toml::Table* extra = nullptr) {
  if (!fs::is_regular_file(path))
    throw Error(Errc::Io, "config file not found: " + path.string());
  fs::path base = fs::absolute(path).parent_path();
  return config_from_toml(read_file(path), base, extra);
}

}  // namespace hdlscale
