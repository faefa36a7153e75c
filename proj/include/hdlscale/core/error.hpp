#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdlscale {

enum class Errc {
  // suite loading
  MissingSpec,
  MissingTestbench,
  DuplicateId,
  ExternalDependency,
  InvalidSuite,
  // configuration
  InvalidConfig,
  TemperatureOutOfRange,
  UnknownModelForPricing,
  // campaign / store
  ConfigMismatch,
  OutputDirNotWritable,
  CampaignAborted,
  ToolNotFound,
  Io,
  // generation
  ExtractError,
  ProviderError,
  // analysis
  EmptyStore,
  InvalidCounts,
  EarlyStopStore,
  InsufficientPoints,
  TooFewSamples,
  MissingRefCode,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingSpec: return "MissingSpec";
    case Errc::MissingTestbench: return "MissingTestbench";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::ExternalDependency: return "ExternalDependency";
    case Errc::InvalidSuite: return "InvalidSuite";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::TemperatureOutOfRange: return "TemperatureOutOfRange";
    case Errc::UnknownModelForPricing: return "UnknownModelForPricing";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::OutputDirNotWritable: return "OutputDirNotWritable";
    case Errc::CampaignAborted: return "CampaignAborted";
    case Errc::ToolNotFound: return "ToolNotFound";
    case Errc::Io: return "Io";
    case Errc::ExtractError: return "ExtractError";
    case Errc::ProviderError: return "ProviderError";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::InvalidCounts: return "InvalidCounts";
    case Errc::EarlyStopStore: return "EarlyStopStore";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::MissingRefCode: return "MissingRefCode";
  }
  return "Unknown";
}

// All library failures are reported as Error; code() is what callers branch on.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hdlscale
