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

#include "lorastream/recovery.hpp"

#include <algorithm>
#include <set>

namespace lorastream::recovery {

void QuorumAssignment::validate() const
{
    if (gateways.size() < 3 || gateways.size() % 2 == 0) {
        throw std::invalid_argument("quorum for node " + std::to_string(node)
                                    + " must list an odd number of gateways, at least 3 (got "
                                    + std::to_string(gateways.size()) + ")");
    }
    const std::set<GatewayId> unique(gateways.begin(), gateways.end());
    if (unique.size() != gateways.size()) {
        throw std::invalid_argument("quorum for node " + std::to_string(node) + " lists a gateway twice");
    }
}

std::vector<std::pair<GatewayId, GatewayId>> probe_rotation(const QuorumAssignment& quorum)
{
    const auto& g = quorum.gateways;
    if (g.size() == 3) {
        return {{g[0], g[1]}, {g[1], g[2]}, {g[0], g[2]}};
    }
    std::vector<std::pair<GatewayId, GatewayId>> pairs;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            pairs.emplace_back(g[i], g[j]);
        }
    }
    return pairs;
}

const char* to_string(CorrelationOutcome outcome)
{
    switch (outcome) {
    case CorrelationOutcome::Matched: return "matched";
    case CorrelationOutcome::UnknownId: return "unknown-id";
    case CorrelationOutcome::Duplicate: return "duplicate";
    case CorrelationOutcome::AfterDeadline: return "after-deadline";
    }
    return "?";
}

std::optional<GatewayId> elect_primary(const std::map<GatewayId, std::uint32_t>& relayed_counts)
{
    std::optional<GatewayId> winner;
    std::uint32_t best = 0;
    // Ascending id order, so strict > keeps the lowest id on ties.
    for (const auto& [gateway, count] : relayed_counts) {
        if (count > best) {
            best = count;
            winner = gateway;
        }
    }
    return winner;
}

ProbeCycle::ProbeCycle(QuorumAssignment quorum, VirtualTime started_at, VirtualTime deadline,
                       CorrelationIdIssuer& issuer)
    : quorum_(std::move(quorum)), started_at_(started_at), deadline_(deadline)
{
    quorum_.validate();
    if (deadline < started_at) {
        throw std::invalid_argument("probe deadline precedes the cycle start");
    }
    std::size_t index = 0;
    for (const auto& [a, b] : probe_rotation(quorum_)) {
        ProbeRound round;
        round.round_index = index++;
        round.first.gateway = a;
        round.first.correlation_id = issuer.issue();
        round.second.gateway = b;
        round.second.correlation_id = issuer.issue();
        rounds_.push_back(round);
    }
}

std::vector<ProbeLeg> ProbeCycle::unsent_legs() const
{
    std::vector<ProbeLeg> legs;
    for (const auto& round : rounds_) {
        for (const auto* leg : {&round.first, &round.second}) {
            if (!leg->sent_at) {
                legs.push_back(*leg);
            }
        }
    }
    return legs;
}

ProbeLeg* ProbeCycle::find_leg(CorrelationId id)
{
    for (auto& round : rounds_) {
        if (round.first.correlation_id == id) {
            return &round.first;
        }
        if (round.second.correlation_id == id) {
            return &round.second;
        }
    }
    return nullptr;
}

void ProbeCycle::mark_sent(CorrelationId id, VirtualTime at)
{
    auto* leg = find_leg(id);
    if (leg == nullptr) {
        throw std::invalid_argument("mark_sent: correlation id not issued by this cycle");
    }
    leg->sent_at = at;
}

CorrelationOutcome ProbeCycle::correlate_response(CorrelationId id, GatewayId gateway, VirtualTime at)
{
    auto* leg = find_leg(id);
    if (leg == nullptr || leg->gateway != gateway || !leg->sent_at) {
        ++unknown_;
        return CorrelationOutcome::UnknownId;
    }
    if (leg->responded_at) {
        ++duplicates_;
        return CorrelationOutcome::Duplicate;
    }
    if (at > deadline_) {
        return CorrelationOutcome::AfterDeadline;
    }
    leg->responded_at = at;
    return CorrelationOutcome::Matched;
}

std::map<GatewayId, std::uint32_t> ProbeCycle::relayed_counts() const
{
    std::map<GatewayId, std::uint32_t> counts;
    for (GatewayId g : quorum_.gateways) {
        counts[g] = 0;
    }
    for (const auto& round : rounds_) {
        for (const auto* leg : {&round.first, &round.second}) {
            if (leg->responded_at) {
                ++counts[leg->gateway];
            }
        }
    }
    return counts;
}

CycleOutcome ProbeCycle::finish(VirtualTime at) const
{
    auto counts = relayed_counts();
    const auto winner = elect_primary(counts);
    if (!winner) {
        return NoQuorum{quorum_.node};
    }
    return ElectionResult{quorum_.node, *winner, std::move(counts), at};
}

ProbeCycle::State ProbeCycle::state() const
{
    return State{quorum_, started_at_, deadline_, rounds_, unknown_, duplicates_};
}

ProbeCycle ProbeCycle::from_state(State state)
{
    ProbeCycle cycle;
    cycle.quorum_ = std::move(state.quorum);
    cycle.started_at_ = state.started_at;
    cycle.deadline_ = state.deadline;
    cycle.rounds_ = std::move(state.rounds);
    cycle.unknown_ = state.unknown;
    cycle.duplicates_ = state.duplicates;
    return cycle;
}

std::optional<VirtualTime> NetworkProbeTransport::round_trip(GatewayId gateway, DeviceId node, CorrelationId,
                                                             VirtualTime send_at)
{
    const auto result = network_.downlink(gateway, node, send_at, rng_);
    const auto* delivered = std::get_if<Delivered>(&result);
    if (delivered == nullptr) {
        return std::nullopt;
    }
    return network_.relay_reply(gateway, node, delivered->at, rng_);
}

CycleOutcome run_probe_cycle(const QuorumAssignment& quorum, VirtualTime now, VirtualTime deadline,
                             ProbeTransport& transport, CorrelationIdIssuer& issuer)
{
    ProbeCycle cycle(quorum, now, deadline, issuer);
    for (const auto& leg : cycle.unsent_legs()) {
        cycle.mark_sent(leg.correlation_id, now);
        const auto echo = transport.round_trip(leg.gateway, quorum.node, leg.correlation_id, now);
        if (echo) {
            cycle.correlate_response(leg.correlation_id, leg.gateway, *echo);
        }
    }
    return cycle.finish(deadline);
}

}  // namespace lorastream::recovery
