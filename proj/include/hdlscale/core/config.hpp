#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/llm/provider_profile.hpp"
#include "hdlscale/sim/sim_profile.hpp"

namespace hdlscale {

inline constexpr int kDefaultMaxSamples = 512;
inline constexpr int kDefaultQueueCapacity = 64;

// Behaviour of the in-process scripted provider. Pass decisions and code
// variants are drawn from per-(problem, index) uniforms that do not depend on
// temperature, so outcomes are nested across temperature settings.
struct MockSettings {
  double pass_prob = 0.05;
  double temperature_gain = 0.1;  // pass probability added per unit temperature
  double variants_per_temperature = 4.0;
  int delay_ms = 0;

  friend bool operator==(const MockSettings&, const MockSettings&) = default;
};

struct ReportSettings {
  std::vector<int> checkpoints = {1, 10, 512};
  double discount_factor = 1.0;
  int normalize_samples = 0;  // 0: report raw per-problem totals

  friend bool operator==(const ReportSettings&, const ReportSettings&) = default;
};

struct CampaignConfig {
  std::filesystem::path suite_path;
  GenerationParams params;
  std::optional<int> max_samples;
  std::optional<StopMode> stop_mode;
  int gen_concurrency = 16;
  int sim_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int queue_capacity = kDefaultQueueCapacity;
  std::string sim_profile = "icarus";
  int sim_timeout_s = 60;
  std::filesystem::path output_dir = "out";

  std::uint64_t seed = 0;
  bool mock = false;
  bool debug_keep_failed = false;
  int progress_interval_s = 5;
  std::string prompt_version = "v1";

  std::map<std::string, ProviderProfile> providers;
  std::map<std::string, SimProfile> sim_profiles;
  PricingTable pricing;
  MockSettings mock_settings;
  ReportSettings report;

  int samples_cap() const { return max_samples.value_or(kDefaultMaxSamples); }
  StopMode mode() const { return stop_mode.value_or(StopMode::EarlyStop); }

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

// Provider profile in effect for a config; --mock forces the scripted provider.
inline ProviderProfile resolve_provider(const CampaignConfig& cfg) {
  if (cfg.mock) return mock_provider_profile();
  auto it = cfg.providers.find(cfg.params.provider_profile);
  if (it != cfg.providers.end()) return it->second;
  if (cfg.params.provider_profile == "default") return ProviderProfile{};
  throw Error(Errc::InvalidConfig, "unknown provider profile '" + cfg.params.provider_profile + "'");
}

// Simulator profile in effect, with the campaign-level timeout applied.
inline SimProfile resolve_sim_profile(const CampaignConfig& cfg) {
  SimProfile p;
  if (cfg.mock || cfg.sim_profile == "mock") {
    p = mock_sim_profile();
  } else if (auto it = cfg.sim_profiles.find(cfg.sim_profile); it != cfg.sim_profiles.end()) {
    p = it->second;
  } else if (cfg.sim_profile == "icarus") {
    p = icarus_sim_profile();
  } else {
    throw Error(Errc::InvalidConfig, "unknown simulator profile '" + cfg.sim_profile + "'");
  }
  p.timeout_s = cfg.sim_timeout_s;
  return p;
}

// Fills defaults and rejects out-of-range values; nothing is clamped.
// Missing pricing for the model is an error only when a pricing table is
// configured (cost reporting enabled); otherwise it is appended to warnings.
inline CampaignConfig validate_config(CampaignConfig cfg, const PricingTable& pricing,
                                      std::vector<std::string>* warnings = nullptr) {
  if (!cfg.max_samples) cfg.max_samples = kDefaultMaxSamples;
  if (!cfg.stop_mode) cfg.stop_mode = StopMode::EarlyStop;

  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw Error(Errc::InvalidConfig, msg);
  };
  require(*cfg.max_samples >= 1, "max_samples must be >= 1");
  require(cfg.queue_capacity >= 1, "queue_capacity must be >= 1");
  require(cfg.gen_concurrency >= 1, "gen_concurrency must be >= 1");
  require(cfg.sim_workers >= 1, "sim_workers must be >= 1");
  require(cfg.sim_timeout_s >= 1, "sim_timeout_s must be >= 1");
  require(cfg.params.max_output_tokens >= 1, "max_output_tokens must be >= 1");
  require(cfg.params.top_p > 0.0 && cfg.params.top_p <= 1.0, "top_p must be in (0, 1]");
  require(!cfg.params.model_id.empty(), "model id is required");
  require(cfg.progress_interval_s >= 1, "progress_interval_s must be >= 1");
  require(cfg.report.discount_factor > 0.0 && cfg.report.discount_factor <= 1.0,
          "discount_factor must be in (0, 1]");

  ProviderProfile provider = resolve_provider(cfg);
  validate_provider_profile(provider);
  const double t = cfg.params.temperature;
  if (!(t >= provider.temperature_min && t <= provider.temperature_max)) {
    throw Error(Errc::TemperatureOutOfRange,
                "temperature " + std::to_string(t) + " outside [" +
                    std::to_string(provider.temperature_min) + ", " +
                    std::to_string(provider.temperature_max) + "] of provider '" + provider.name +
                    "'");
  }
  validate_sim_profile(resolve_sim_profile(cfg));

  if (!pricing.count(cfg.params.model_id)) {
    std::string msg = "no pricing for model '" + cfg.params.model_id + "'";
    if (!pricing.empty()) throw Error(Errc::UnknownModelForPricing, msg);
    if (warnings) warnings->push_back(msg + "; cost reporting disabled");
  }
  return cfg;
}

}  // namespace hdlscale
