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
#include "lorastream/event_log.hpp"
#include "lorastream/join_engine.hpp"
#include "lorastream/recovery.hpp"
#include "lorastream/scenario.hpp"
#include "lorastream/state_store.hpp"
#include "lorastream/windowing.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <variant>
#include <vector>

namespace lorastream {

struct DeviceInfo {
    DeviceId id = 0;
    DeviceClass device_class = DeviceClass::A;
    Position position;
    int stream = 1;
    std::string key;
    recovery::QuorumAssignment quorum;
};

struct EngineConfig {
    std::map<DeviceId, DeviceInfo> devices;
    std::map<GatewayId, Position> gateways;
    windowing::WindowParams window;
    Millis watermark_delay_ms = 500;
    Millis base_composite_window = 1;
    adr::DataRateConfig data_rates;
    int initial_rate_index = 0;
    double firing_threshold_m = 1000.0;
    std::vector<ShardSpec> shards;
    std::uint32_t checkpoint_interval_windows = 5;
    std::set<std::uint64_t> checkpoint_failures;

    static EngineConfig from_scenario(const Scenario& scenario);
};

/// One gateway's forward of an uplink.
struct ReceptionInput {
    DeviceId device = 0;
    FrameCounter frame_counter = 0;
    GatewayId gateway = 0;
    double snr_db = 0.0;
    VirtualTime sent_at;
    Payload payload;
};

/// A node's answer to a probe leg, relayed by the gateway that carried it.
struct ProbeEchoInput {
    DeviceId device = 0;
    GatewayId gateway = 0;
    recovery::CorrelationId correlation_id = 0;
};

/// Lets virtual time pass with no input.
struct TickInput {};

struct JournalEntry {
    VirtualTime at;
    std::variant<ReceptionInput, ProbeEchoInput, TickInput> input;
};

using Journal = state::InputJournal<JournalEntry>;

/// Ask the world to send one probe leg to a node through a gateway.
struct ProbeCommand {
    DeviceId node = 0;
    GatewayId gateway = 0;
    recovery::CorrelationId correlation_id = 0;
};

/// The durable output log. Join outputs reach it only through a successful
/// checkpoint, so every published output is covered by a persisted epoch.
class OutputSink {
public:
    void publish(const join::JoinedOutput& output) { outputs_.push_back(output); }
    const std::vector<join::JoinedOutput>& outputs() const { return outputs_; }
    void write_jsonl(const std::filesystem::path& path) const;

private:
    std::vector<join::JoinedOutput> outputs_;
};

/// An internal consistency check failed: two components disagree about the
/// same fact. Not recoverable.
class InternalBreach : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The stream-processing orchestrator. A deterministic state machine over the
/// input journal: it never draws randomness and only talks to the world
/// through probe commands, the event log and the output sink.
///
/// Internal timers (window ends, watermarks, late deadlines, probe deadlines)
/// with a deadline strictly before an input's time fire before that input.
class Orchestrator {
public:
    Orchestrator(EngineConfig config, state::SnapshotStore& store, const Journal& journal, EventLog& log,
                 OutputSink& sink);
    ~Orchestrator();
    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    /// Fresh state at virtual time zero: window 0 opens, every device's
    /// primary gateway is the first of its quorum.
    void start();

    /// Processes the journal entry at `offset`.
    void consume(std::size_t offset);

    std::optional<VirtualTime> next_deadline() const;

    /// Fires every timer before `end`, then takes a final checkpoint.
    void finish(VirtualTime end);

    void set_command_handler(std::function<void(const ProbeCommand&)> handler);

    /// Loads the newest persisted epoch, or fresh state if none exists.
    /// Returns the epoch restored (0 for fresh state).
    std::uint64_t restore_latest_snapshot();
    /// Re-processes journal entries past the restored snapshot with probe
    /// commands and log lines suppressed. Returns the number replayed.
    std::size_t replay_journal_since_snapshot();

    const state::OperatorState& operator_state() const;
    GatewayId primary_at(DeviceId device, VirtualTime t) const;
    Millis current_window_size() const;
    std::uint64_t epoch() const;
    std::size_t pending_outputs() const;
    /// The complete engine state, encoded deterministically.
    std::vector<std::uint8_t> state_fingerprint() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

static_assert(recovery::RecoverableOrchestrator<Orchestrator>);

}  // namespace lorastream
