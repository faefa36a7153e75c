#pragma once

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/config_file.hpp"
#include "hdlscale/core/error.hpp"
#include "hdlscale/core/json_io.hpp"
#include "hdlscale/core/suite.hpp"
#include "hdlscale/core/types.hpp"
#include "hdlscale/dispersion/dispersion.hpp"
#include "hdlscale/dispersion/lexer.hpp"
#include "hdlscale/llm/gateway.hpp"
#include "hdlscale/llm/mock_provider.hpp"
#include "hdlscale/llm/prompt.hpp"
#include "hdlscale/metrics/metrics.hpp"
#include "hdlscale/metrics/report.hpp"
#include "hdlscale/orchestrator/campaign.hpp"
#include "hdlscale/orchestrator/store.hpp"
#include "hdlscale/sim/simulate.hpp"
