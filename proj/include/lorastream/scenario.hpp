/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include "lorastream/adr.hpp"
#include "lorastream/join_engine.hpp"
#include "lorastream/lora_network.hpp"
#include "lorastream/recovery.hpp"
#include "lorastream/windowing.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lorastream {

struct DeviceSpec {
    DeviceId id = 0;
    DeviceClass device_class = DeviceClass::A;
    Position position;
    std::int64_t data_rate = 25;
    std::int64_t message_size = 50;
    int stream = 1;
    std::string key;
    EntityKind entity_kind = EntityKind::BaseEntity;
    Millis send_period_ms = 2000;
    Millis send_offset_ms = 0;
};

struct GatewaySpec {
    GatewayId id = 0;
    Position position;
};

struct LinkSpec {
    DeviceId device = 0;
    GatewayId gateway = 0;
    LinkParams params;
};

struct ShardSpec {
    join::ShardId id = 0;
    std::set<GatewayId> gateways;
};

/// At-least-once backhaul: a gateway forwards a reception a second time.
struct DuplicateForward {
    GatewayId gateway = 0;
    VirtualTime from;
    VirtualTime to;
    double probability = 0.0;
    Millis delay_ms = 100;
};

struct FaultSchedule {
    std::vector<LossOverride> loss_overrides;
    std::vector<GatewayOutage> gateway_outages;
    std::vector<DuplicateForward> duplicate_forwards;
    std::optional<VirtualTime> orchestrator_kill;
    /// 1-based checkpoint attempts whose persistence fails.
    std::set<std::uint64_t> checkpoint_failures;
};

struct Scenario {
    std::uint64_t seed = 1;
    Millis duration_ms = 60000;
    ReceiveWindowConfig receive_windows;
    std::vector<GatewaySpec> gateways;
    std::vector<DeviceSpec> devices;
    LinkParams link_defaults;
    std::vector<LinkSpec> links;
    std::vector<recovery::QuorumAssignment> quorums;
    windowing::WindowParams window;
    Millis watermark_delay_ms = 500;
    /// Devices whose transmission times seed the base composite window.
    std::optional<std::pair<DeviceId, DeviceId>> bcw_devices;
    adr::DataRateConfig data_rates;
    int initial_rate_index = 0;
    double firing_threshold_m = 1000.0;
    std::vector<ShardSpec> shards;
    std::uint32_t checkpoint_interval_windows = 5;
    bool backup_orchestrator = true;
    FaultSchedule faults;

    const DeviceSpec& device(DeviceId id) const;
    const recovery::QuorumAssignment& quorum_of(DeviceId id) const;
    LinkParams link_params(DeviceId device, GatewayId gateway) const;
    /// Shards as configured, or one shard over every gateway.
    std::vector<ShardSpec> effective_shards() const;
    std::pair<DeviceId, DeviceId> effective_bcw_devices() const;
    Millis base_composite_window() const;
};

/// A field-path-qualified validation failure.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse errors and validation errors both surface as ScenarioError.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
void validate_scenario(const Scenario& scenario);

std::string scenario_to_json(const Scenario& scenario);

}  // namespace lorastream
