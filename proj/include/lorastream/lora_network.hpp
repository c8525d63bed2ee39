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

#include "lorastream/sim_core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lorastream {

using DeviceId = std::uint32_t;
using GatewayId = std::uint32_t;
using FrameCounter = std::uint32_t;

enum class DeviceClass : std::uint8_t { A, B, C };

const char* to_string(DeviceClass c);

struct Position {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Position&) const = default;
};

double distance(Position a, Position b);

/// Generic entity roles: gateway-sourced stream data vs business-layer objects.
enum class EntityKind : std::uint8_t { BaseEntity, BusinessObject };

const char* to_string(EntityKind kind);

/// Opaque application payload carried by an uplink.
struct Payload {
    std::string key;
    std::int64_t value = 0;
    EntityKind kind = EntityKind::BaseEntity;

    bool operator==(const Payload&) const = default;
};

struct EndDevice {
    DeviceId id = 0;
    DeviceClass device_class = DeviceClass::A;
    Position position;
    std::int64_t data_rate = 1;         // bytes per second
    std::int64_t avg_message_size = 1;  // bytes
    FrameCounter next_frame_counter = 0;
    int stream_id = 1;
};

struct Gateway {
    GatewayId id = 0;
    Position position;
};

struct Reception {
    GatewayId gateway = 0;
    double snr_db = 0.0;
    VirtualTime arrived_at;

    bool operator==(const Reception&) const = default;
};

struct UplinkFrame {
    DeviceId device = 0;
    FrameCounter frame_counter = 0;
    Payload payload;
    VirtualTime sent_at;
    std::vector<Reception> receptions;  // ascending gateway id

    bool received_by(GatewayId gateway) const;
    const Reception* reception_from(GatewayId gateway) const;
};

/// Log-distance path loss with Gaussian shadowing.
struct SnrParams {
    double snr_at_ref_db = 10.0;
    double ref_distance_m = 100.0;
    double path_loss_exponent = 2.0;
    double noise_sigma_db = 0.0;
};

struct LinkParams {
    double drop_probability = 0.0;
    Millis delay_ms = 5;
    SnrParams snr;
};

struct ReceiveWindowConfig {
    Millis rx1_offset_ms = 1000;
    Millis rx2_offset_ms = 2000;
    Millis rx_width_ms = 500;
    Millis class_b_period_ms = 8000;
};

/// Replaces the drop probability of matching links while from <= now < to.
/// Absent device or gateway matches every device or gateway.
struct LossOverride {
    VirtualTime from;
    VirtualTime to;
    std::optional<DeviceId> device;
    std::optional<GatewayId> gateway;
    double drop_probability = 1.0;
};

enum class OutageMode : std::uint8_t {
    Drop,    // traffic through the gateway is lost
    Buffer,  // uplinks are held and forwarded when the outage ends
};

struct GatewayOutage {
    GatewayId gateway = 0;
    VirtualTime from;
    VirtualTime to;
    OutageMode mode = OutageMode::Drop;
};

struct Delivered {
    VirtualTime at;
    bool operator==(const Delivered&) const = default;
};

enum class NotDeliverableReason : std::uint8_t { NoOpenWindow, LinkLoss, GatewayOutage };

const char* to_string(NotDeliverableReason reason);

struct NotDeliverable {
    NotDeliverableReason reason;
    bool operator==(const NotDeliverable&) const = default;
};

using DownlinkResult = std::variant<Delivered, NotDeliverable>;

/// End devices, gateways and the lossy links between them.
class Network {
public:
    explicit Network(ReceiveWindowConfig windows = {}) : windows_(windows) {}

    void add_device(EndDevice device);
    void add_gateway(Gateway gateway);
    /// A device only reaches gateways it is connected to.
    void connect(DeviceId device, GatewayId gateway, LinkParams link);

    void add_loss_override(LossOverride override_rule);
    void add_gateway_outage(GatewayOutage outage);

    const EndDevice& device(DeviceId id) const;
    const Gateway& gateway(GatewayId id) const;
    const LinkParams& link(DeviceId device, GatewayId gateway) const;
    std::vector<GatewayId> connected_gateways(DeviceId device) const;
    std::vector<DeviceId> device_ids() const;
    const ReceiveWindowConfig& windows() const { return windows_; }

    double effective_drop_probability(DeviceId device, GatewayId gateway, VirtualTime at) const;

    /// Consumes the device's next frame counter and draws one Bernoulli trial
    /// (plus SNR noise on success) per connected gateway, in gateway-id order.
    UplinkFrame transmit_uplink(DeviceId device, Payload payload, VirtualTime now, Rng& rng);

    double compute_snr(DeviceId device, GatewayId gateway, Rng& rng) const;

    /// Class A: only inside an unused receive window of the latest uplink.
    /// Class B: the next free periodic slot. Class C: now + link delay.
    DownlinkResult downlink(GatewayId gateway, DeviceId device, VirtualTime now, Rng& rng);

    /// Device-to-gateway reply to a downlink that arrived at delivered_at.
    /// Does not consume a frame counter.
    std::optional<VirtualTime> relay_reply(GatewayId gateway, DeviceId device, VirtualTime delivered_at, Rng& rng);

    std::uint64_t uplink_count(DeviceId device) const;
    std::uint64_t downlink_delivery_count(DeviceId device) const;

private:
    struct DownlinkState {
        std::optional<VirtualTime> last_uplink;
        bool rx_used[2] = {false, false};
        std::optional<std::int64_t> last_class_b_slot;
        std::uint64_t uplinks = 0;
        std::uint64_t deliveries = 0;
    };

    EndDevice& mutable_device(DeviceId id);
    const GatewayOutage* outage_at(GatewayId gateway, VirtualTime at) const;
    /// Applies buffering outages to an arrival time; nullopt when dropped.
    std::optional<VirtualTime> through_gateway(GatewayId gateway, VirtualTime arrival) const;

    ReceiveWindowConfig windows_;
    std::map<DeviceId, EndDevice> devices_;
    std::map<GatewayId, Gateway> gateways_;
    std::map<std::pair<DeviceId, GatewayId>, LinkParams> links_;
    std::vector<LossOverride> loss_overrides_;
    std::vector<GatewayOutage> outages_;
    std::map<DeviceId, DownlinkState> downlink_state_;
};

}  // namespace lorastream
