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

#include "lorastream/lora_network.hpp"

#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace lorastream::recovery {

using CorrelationId = std::uint64_t;

/// The gateways a node is connected to for quorum probing. G1 is gateways[0].
struct QuorumAssignment {
    DeviceId node = 0;
    std::vector<GatewayId> gateways;

    /// Throws std::invalid_argument unless the list is odd, >= 3 and duplicate-free.
    void validate() const;
};

/// Pairs probed per cycle. Three gateways use (G1,G2), (G2,G3), (G1,G3);
/// larger quorums probe every pair in lexicographic order.
std::vector<std::pair<GatewayId, GatewayId>> probe_rotation(const QuorumAssignment& quorum);

/// Monotonic source of correlation ids, unique across all cycles of a run.
class CorrelationIdIssuer {
public:
    explicit CorrelationIdIssuer(CorrelationId next = 1) : next_(next) {}
    CorrelationId issue() { return next_++; }
    CorrelationId peek() const { return next_; }

private:
    CorrelationId next_;
};

struct ProbeLeg {
    GatewayId gateway = 0;
    CorrelationId correlation_id = 0;
    std::optional<VirtualTime> sent_at;
    std::optional<VirtualTime> responded_at;
};

struct ProbeRound {
    std::size_t round_index = 0;
    ProbeLeg first;
    ProbeLeg second;
};

enum class CorrelationOutcome : std::uint8_t { Matched, UnknownId, Duplicate, AfterDeadline };

const char* to_string(CorrelationOutcome outcome);

struct ElectionResult {
    DeviceId node = 0;
    GatewayId primary_gateway = 0;
    std::map<GatewayId, std::uint32_t> relayed_counts;
    VirtualTime decided_at;

    bool operator==(const ElectionResult&) const = default;
};

/// Nobody answered before the deadline; the caller keeps the previous primary.
struct NoQuorum {
    DeviceId node = 0;
    bool operator==(const NoQuorum&) const = default;
};

using CycleOutcome = std::variant<ElectionResult, NoQuorum>;

/// Highest count wins, lowest gateway id on ties. nullopt if every count is zero.
std::optional<GatewayId> elect_primary(const std::map<GatewayId, std::uint32_t>& relayed_counts);

/// One rotation of correlation-id probes for a node.
class ProbeCycle {
public:
    ProbeCycle(QuorumAssignment quorum, VirtualTime started_at, VirtualTime deadline, CorrelationIdIssuer& issuer);

    DeviceId node() const { return quorum_.node; }
    const QuorumAssignment& quorum() const { return quorum_; }
    VirtualTime started_at() const { return started_at_; }
    VirtualTime deadline() const { return deadline_; }
    const std::vector<ProbeRound>& rounds() const { return rounds_; }

    /// Legs in send order: each round's first leg, then its second.
    std::vector<ProbeLeg> unsent_legs() const;
    void mark_sent(CorrelationId id, VirtualTime at);

    CorrelationOutcome correlate_response(CorrelationId id, GatewayId gateway, VirtualTime at);

    std::uint64_t unknown_responses() const { return unknown_; }
    std::uint64_t duplicate_responses() const { return duplicates_; }

    std::map<GatewayId, std::uint32_t> relayed_counts() const;
    CycleOutcome finish(VirtualTime at) const;

    struct State {
        QuorumAssignment quorum;
        VirtualTime started_at;
        VirtualTime deadline;
        std::vector<ProbeRound> rounds;
        std::uint64_t unknown;
        std::uint64_t duplicates;
    };
    State state() const;
    static ProbeCycle from_state(State state);

private:
    ProbeCycle() = default;
    ProbeLeg* find_leg(CorrelationId id);

    QuorumAssignment quorum_;
    VirtualTime started_at_;
    VirtualTime deadline_;
    std::vector<ProbeRound> rounds_;
    std::uint64_t unknown_ = 0;
    std::uint64_t duplicates_ = 0;
};

/// Carries one probe leg to a node and back.
class ProbeTransport {
public:
    virtual ~ProbeTransport() = default;
    /// Arrival time of the node's echo at the orchestrator, or nullopt if lost.
    virtual std::optional<VirtualTime> round_trip(GatewayId gateway, DeviceId node, CorrelationId id,
                                                  VirtualTime send_at) = 0;
};

/// Probes over the simulated network: a downlink under the node's device-class
/// rules followed by an echo uplink on the same link.
class NetworkProbeTransport final : public ProbeTransport {
public:
    NetworkProbeTransport(Network& network, Rng& rng) : network_(network), rng_(rng) {}

    std::optional<VirtualTime> round_trip(GatewayId gateway, DeviceId node, CorrelationId id,
                                          VirtualTime send_at) override;

private:
    Network& network_;
    Rng& rng_;
};

/// Sends every leg of a cycle at `now` and elects from the echoes that
/// arrive by the deadline.
CycleOutcome run_probe_cycle(const QuorumAssignment& quorum, VirtualTime now, VirtualTime deadline,
                             ProbeTransport& transport, CorrelationIdIssuer& issuer);

class NoBackupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
concept RecoverableOrchestrator = requires(T& t) {
    { t.restore_latest_snapshot() } -> std::convertible_to<std::uint64_t>;
    { t.replay_journal_since_snapshot() } -> std::convertible_to<std::size_t>;
};

struct PromotionResult {
    std::uint64_t resumed_epoch = 0;
    std::size_t replayed_inputs = 0;
    std::string reason;
};

/// Cold-standby orchestrator: holds no live state until promoted.
class BackupOrchestrator {
public:
    explicit BackupOrchestrator(bool configured) : available_(configured) {}

    bool available() const { return available_; }

    /// Restores the standby from the last persisted epoch and replays the
    /// input journal past it. Throws NoBackupError when no standby remains.
    template <RecoverableOrchestrator Orchestrator>
    PromotionResult promote_backup(Orchestrator& standby, std::string_view reason)
    {
        if (!available_) {
            throw NoBackupError("promote_backup: no backup orchestrator configured");
        }
        available_ = false;
        PromotionResult result;
        result.resumed_epoch = standby.restore_latest_snapshot();
        result.replayed_inputs = standby.replay_journal_since_snapshot();
        result.reason = std::string(reason);
        return result;
    }

private:
    bool available_;
};

}  // namespace lorastream::recovery
