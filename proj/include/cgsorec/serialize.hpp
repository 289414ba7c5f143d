// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "cgsorec/guidance.hpp"
#include "cgsorec/schedule.hpp"
#include "cgsorec/trainer.hpp"

namespace cgsorec {

nlohmann::json to_json(const NoiseSchedule& sched);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GuidanceConfig& cfg);
GuidanceConfig guidance_config_from_json(const nlohmann::json& j);

}  // namespace cgsorec
