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

#include "lorastream/lora_network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lorastream {

const char* to_string(DeviceClass c)
{
    switch (c) {
    case DeviceClass::A: return "A";
    case DeviceClass::B: return "B";
    case DeviceClass::C: return "C";
    }
    return "?";
}

const char* to_string(EntityKind kind)
{
    return kind == EntityKind::BaseEntity ? "BaseEntity" : "BusinessObject";
}

const char* to_string(NotDeliverableReason reason)
{
    switch (reason) {
    case NotDeliverableReason::NoOpenWindow: return "no-open-window";
    case NotDeliverableReason::LinkLoss: return "link-loss";
    case NotDeliverableReason::GatewayOutage: return "gateway-outage";
    }
    return "?";
}

double distance(Position a, Position b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

bool UplinkFrame::received_by(GatewayId gateway) const
{
    return reception_from(gateway) != nullptr;
}

const Reception* UplinkFrame::reception_from(GatewayId gateway) const
{
    for (const auto& r : receptions) {
        if (r.gateway == gateway) {
            return &r;
        }
    }
    return nullptr;
}

void Network::add_device(EndDevice device)
{
    if (device.data_rate <= 0 || device.avg_message_size <= 0) {
        throw std::invalid_argument("device " + std::to_string(device.id) + ": data rate and message size must be positive");
    }
    if (!std::isfinite(device.position.x) || !std::isfinite(device.position.y)) {
        throw std::invalid_argument("device " + std::to_string(device.id) + ": position must be finite");
    }
    const auto id = device.id;
    if (!devices_.emplace(id, std::move(device)).second) {
        throw std::invalid_argument("duplicate device id " + std::to_string(id));
    }
    downlink_state_[id];
}

void Network::add_gateway(Gateway gateway)
{
    if (!std::isfinite(gateway.position.x) || !std::isfinite(gateway.position.y)) {
        throw std::invalid_argument("gateway " + std::to_string(gateway.id) + ": position must be finite");
    }
    if (!gateways_.emplace(gateway.id, gateway).second) {
        throw std::invalid_argument("duplicate gateway id " + std::to_string(gateway.id));
    }
}

void Network::connect(DeviceId device, GatewayId gateway, LinkParams link)
{
    (void)this->device(device);
    (void)this->gateway(gateway);
    if (!(link.drop_probability >= 0.0 && link.drop_probability <= 1.0)) {
        throw std::invalid_argument("drop_probability must lie in [0,1]");
    }
    if (!(link.snr.ref_distance_m > 0.0)) {
        throw std::invalid_argument("ref_distance must be positive");
    }
    if (link.delay_ms < 0) {
        throw std::invalid_argument("link delay must be non-negative");
    }
    links_[{device, gateway}] = link;
}

void Network::add_loss_override(LossOverride override_rule)
{
    if (!(override_rule.drop_probability >= 0.0 && override_rule.drop_probability <= 1.0)) {
        throw std::invalid_argument("loss override drop_probability must lie in [0,1]");
    }
    loss_overrides_.push_back(override_rule);
}

void Network::add_gateway_outage(GatewayOutage outage)
{
    (void)gateway(outage.gateway);
    outages_.push_back(outage);
}

const EndDevice& Network::device(DeviceId id) const
{
    auto it = devices_.find(id);
    if (it == devices_.end()) {
        throw std::out_of_range("unknown device " + std::to_string(id));
    }
    return it->second;
}

EndDevice& Network::mutable_device(DeviceId id)
{
    auto it = devices_.find(id);
    if (it == devices_.end()) {
        throw std::out_of_range("unknown device " + std::to_string(id));
    }
    return it->second;
}

const Gateway& Network::gateway(GatewayId id) const
{
    auto it = gateways_.find(id);
    if (it == gateways_.end()) {
        throw std::out_of_range("unknown gateway " + std::to_string(id));
    }
    return it->second;
}

const LinkParams& Network::link(DeviceId device, GatewayId gateway) const
{
    auto it = links_.find({device, gateway});
    if (it == links_.end()) {
        throw std::out_of_range("device " + std::to_string(device) + " is not connected to gateway "
                                + std::to_string(gateway));
    }
    return it->second;
}

std::vector<GatewayId> Network::connected_gateways(DeviceId device) const
{
    std::vector<GatewayId> out;
    for (auto it = links_.lower_bound({device, 0}); it != links_.end() && it->first.first == device; ++it) {
        out.push_back(it->first.second);
    }
    return out;
}

std::vector<DeviceId> Network::device_ids() const
{
    std::vector<DeviceId> out;
    out.reserve(devices_.size());
    for (const auto& [id, _] : devices_) {
        out.push_back(id);
    }
    return out;
}

double Network::effective_drop_probability(DeviceId device, GatewayId gateway, VirtualTime at) const
{
    double p = link(device, gateway).drop_probability;
    for (const auto& rule : loss_overrides_) {
        if (at < rule.from || at >= rule.to) {
            continue;
        }
        if (rule.device && *rule.device != device) {
            continue;
        }
        if (rule.gateway && *rule.gateway != gateway) {
            continue;
        }
        p = rule.drop_probability;
    }
    return p;
}

const GatewayOutage* Network::outage_at(GatewayId gateway, VirtualTime at) const
{
    for (const auto& outage : outages_) {
        if (outage.gateway == gateway && at >= outage.from && at < outage.to) {
            return &outage;
        }
    }
    return nullptr;
}

std::optional<VirtualTime> Network::through_gateway(GatewayId gateway, VirtualTime arrival) const
{
    const auto* outage = outage_at(gateway, arrival);
    if (outage == nullptr) {
        return arrival;
    }
    if (outage->mode == OutageMode::Drop) {
        return std::nullopt;
    }
    return outage->to;
}

double Network::compute_snr(DeviceId device, GatewayId gateway, Rng& rng) const
{
    const auto& params = link(device, gateway).snr;
    const double d = distance(this->device(device).position, this->gateway(gateway).position);
    const double ratio = std::max(d, params.ref_distance_m) / params.ref_distance_m;
    const double mean = params.snr_at_ref_db - 10.0 * params.path_loss_exponent * std::log10(ratio);
    return rng.normal(mean, params.noise_sigma_db);
}

UplinkFrame Network::transmit_uplink(DeviceId device, Payload payload, VirtualTime now, Rng& rng)
{
    auto& dev = mutable_device(device);
    UplinkFrame frame;
    frame.device = device;
    frame.frame_counter = dev.next_frame_counter++;
    frame.payload = std::move(payload);
    frame.sent_at = now;

    for (GatewayId gw : connected_gateways(device)) {
        const double p = effective_drop_probability(device, gw, now);
        if (rng.bernoulli(p)) {
            continue;
        }
        const double snr = compute_snr(device, gw, rng);
        const auto arrival = through_gateway(gw, now + link(device, gw).delay_ms);
        if (!arrival) {
            continue;
        }
        frame.receptions.push_back(Reception{gw, snr, *arrival});
    }

    auto& state = downlink_state_[device];
    state.last_uplink = now;
    state.rx_used[0] = false;
    state.rx_used[1] = false;
    ++state.uplinks;
    return frame;
}

DownlinkResult Network::downlink(GatewayId gateway, DeviceId device, VirtualTime now, Rng& rng)
{
    const auto& dev = this->device(device);
    const auto& params = link(device, gateway);
    auto& state = downlink_state_[device];

    if (outage_at(gateway, now) != nullptr) {
        return NotDeliverable{NotDeliverableReason::GatewayOutage};
    }

    VirtualTime transmit_at = now;
    switch (dev.device_class) {
    case DeviceClass::A: {
        if (!state.last_uplink) {
            return NotDeliverable{NotDeliverableReason::NoOpenWindow};
        }
        const Millis offsets[2] = {windows_.rx1_offset_ms, windows_.rx2_offset_ms};
        bool found = false;
        for (int i = 0; i < 2 && !found; ++i) {
            const VirtualTime open = *state.last_uplink + offsets[i];
            const VirtualTime close = open + windows_.rx_width_ms;
            if (state.rx_used[i] || now >= close) {
                continue;
            }
            state.rx_used[i] = true;
            transmit_at = std::max(now, open);
            found = true;
        }
        if (!found) {
            return NotDeliverable{NotDeliverableReason::NoOpenWindow};
        }
        break;
    }
    case DeviceClass::B: {
        const Millis period = windows_.class_b_period_ms;
        std::int64_t slot = (now.ticks + period - 1) / period;
        if (state.last_class_b_slot && slot <= *state.last_class_b_slot) {
            slot = *state.last_class_b_slot + 1;
        }
        state.last_class_b_slot = slot;
        transmit_at = VirtualTime{slot * period};
        break;
    }
    case DeviceClass::C:
        break;
    }

    if (rng.bernoulli(effective_drop_probability(device, gateway, transmit_at))) {
        return NotDeliverable{NotDeliverableReason::LinkLoss};
    }
    ++state.deliveries;
    return Delivered{transmit_at + params.delay_ms};
}

std::optional<VirtualTime> Network::relay_reply(GatewayId gateway, DeviceId device, VirtualTime delivered_at, Rng& rng)
{
    const auto& params = link(device, gateway);
    if (rng.bernoulli(effective_drop_probability(device, gateway, delivered_at))) {
        return std::nullopt;
    }
    return through_gateway(gateway, delivered_at + params.delay_ms);
}

std::uint64_t Network::uplink_count(DeviceId device) const
{
    auto it = downlink_state_.find(device);
    return it == downlink_state_.end() ? 0 : it->second.uplinks;
}

std::uint64_t Network::downlink_delivery_count(DeviceId device) const
{
    auto it = downlink_state_.find(device);
    return it == downlink_state_.end() ? 0 : it->second.deliveries;
}

}  // namespace lorastream
