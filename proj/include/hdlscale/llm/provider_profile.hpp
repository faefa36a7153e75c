#pragma once

#include <string>
#include <vector>

#include "hdlscale/core/error.hpp"

namespace hdlscale {

// Named endpoint configuration for a chat-completions compatible service.
struct ProviderProfile {
  std::string name = "default";
  std::string base_url = "https://api.openai.com/v1";
  std::string auth_env_var = "OPENAI_API_KEY";
  double temperature_min = 0.0;
  double temperature_max = 2.0;
  int request_timeout_s = 120;
  int max_retries = 5;
  int retry_base_delay_ms = 500;
  // Request-body quirks: a JSON object merged over the standard body, and
  // standard fields the provider rejects.
  std::string extra_body_json;
  std::vector<std::string> omit_fields;

  friend bool operator==(const ProviderProfile&, const ProviderProfile&) = default;
};

inline void validate_provider_profile(const ProviderProfile& p) {
  if (p.temperature_min < 0.0 || p.temperature_max < p.temperature_min)
    throw Error(Errc::InvalidConfig, "provider '" + p.name + "': bad temperature range");
  auto scheme = p.base_url.find("://");
  if (scheme == std::string::npos || scheme == 0 || p.base_url.size() <= scheme + 3)
    throw Error(Errc::InvalidConfig, "provider '" + p.name + "': base_url must be absolute");
  if (p.request_timeout_s <= 0 || p.max_retries < 0 || p.retry_base_delay_ms <= 0)
    throw Error(Errc::InvalidConfig, "provider '" + p.name + "': bad timeout/retry settings");
}

// In-process scripted provider used by --mock runs.
inline ProviderProfile mock_provider_profile() {
  ProviderProfile p;
  p.name = "mock";
  p.base_url = "mock://local";
  p.auth_env_var.clear();
  p.request_timeout_s = 30;
  p.max_retries = 0;
  p.retry_base_delay_ms = 1;
  return p;
}

}  // namespace hdlscale
