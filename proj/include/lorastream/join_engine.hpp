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

#include "lorastream/state_store.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace lorastream::join {

using state::EntityId;
using state::OutputId;

enum class FiringMode : std::uint8_t { AllowEarly, OnTime, AllowLate };

const char* to_string(FiringMode mode);

/// Both devices beyond the threshold allow late firing, both within it allow
/// early firing; a mixed pair fires on time.
FiringMode firing_policy(double d1, double d2, double threshold);

/// One device update as it reaches the processing layer.
struct StreamEntry {
    std::string key;
    int stream = 1;  // 1 or 2
    EntityId entity;
    std::int64_t value = 0;
    VirtualTime event_time;
    VirtualTime arrived_at;
    GatewayId gateway = 0;

    bool operator==(const StreamEntry&) const = default;
};

struct Slot {
    EntityId entity;
    std::int64_t value = 0;
    VirtualTime event_time;

    bool operator==(const Slot&) const = default;
};

/// Event-time window [start, end).
struct WindowSpan {
    std::uint64_t index = 0;
    VirtualTime start;
    VirtualTime end;

    bool contains(VirtualTime t) const { return t >= start && t < end; }
    bool operator==(const WindowSpan&) const = default;
};

/// Keyed join cell for one window. Accepts entries whose event time lies in
/// [min_allowed_ts, max_allowed_ts] and keeps the latest per stream.
struct Accumulator {
    std::string key;
    std::uint64_t window_index = 0;
    VirtualTime min_allowed_ts;
    VirtualTime max_allowed_ts;
    std::optional<Slot> slot1;
    std::optional<Slot> slot2;
    bool fired = false;

    bool complete() const { return slot1.has_value() && slot2.has_value(); }
    VirtualTime window_end() const { return max_allowed_ts + 1; }

    bool operator==(const Accumulator&) const = default;
};

struct JoinedOutput {
    std::string key;
    std::uint64_t window_index = 0;
    std::int64_t value1 = 0;
    std::int64_t value2 = 0;
    EntityId entity1;
    EntityId entity2;
    VirtualTime event_time1;
    VirtualTime event_time2;
    VirtualTime window_end;
    OutputId output_id = 0;
    VirtualTime produced_at;

    bool operator==(const JoinedOutput&) const = default;
};

/// A cell fired with a stream slot still empty: a suspected drop. Carries the
/// partial slot so overlapping shards can be merged.
struct Incomplete {
    std::string key;
    std::uint64_t window_index = 0;
    VirtualTime window_end;
    std::optional<Slot> slot1;
    std::optional<Slot> slot2;
    std::vector<int> missing_streams;
    VirtualTime at;

    bool operator==(const Incomplete&) const = default;
};

struct NoOp {};

using FireResult = std::variant<JoinedOutput, Incomplete, NoOp>;

enum class FireReason : std::uint8_t { EarlyComplete, Watermark, LateDeadline };

/// Stable across runs and shards.
OutputId make_output_id(const std::string& key, const EntityId& entity1, const EntityId& entity2,
                        VirtualTime window_end);

/// Emits at most once per accumulator. EarlyComplete requires both slots.
FireResult fire(Accumulator& accumulator, FireReason reason, VirtualTime at);

enum class OfferOutcome : std::uint8_t { Accepted, Early, Late, StaleRejected, AlreadyFired };

const char* to_string(OfferOutcome outcome);

struct OfferResult {
    OfferOutcome outcome = OfferOutcome::Accepted;
    std::optional<JoinedOutput> early_output;  // set when acceptance completed an early-firing cell
};

struct OfferOptions {
    /// Fire an AllowEarly cell as soon as it completes. Off when the caller
    /// decides early firing over the merged view of several shards.
    bool fire_early_locally = true;
};

using ShardId = std::uint32_t;

/// Accumulators for the gateways one partition consumes from.
class Shard {
public:
    Shard(ShardId id, std::set<GatewayId> gateways);

    ShardId id() const { return id_; }
    const std::set<GatewayId>& gateways() const { return gateways_; }
    bool consumes(GatewayId gateway) const { return gateways_.contains(gateway); }

    /// window is the opened window covering entry.event_time, or nullopt if
    /// that window has not opened yet. mode is the key's firing mode for it.
    OfferResult offer(const StreamEntry& entry, const std::optional<WindowSpan>& window, FiringMode mode,
                      const state::OperatorState& operator_state, VirtualTime now, OfferOptions options = {});

    /// Fires one cell as part of an early firing decided across shards. The
    /// cell may hold only one stream; NoOp when absent or already fired.
    FireResult fire_early(const std::string& key, std::uint64_t window_index, VirtualTime now);

    const Accumulator* cell(const std::string& key, std::uint64_t window_index) const;

    /// Fires every cell of the window whose mode this closing applies to:
    /// Watermark closes non-late cells, LateDeadline closes AllowLate cells.
    std::vector<FireResult> close_window(std::uint64_t window_index, FireReason reason, VirtualTime now,
                                         const std::function<FiringMode(const std::string&)>& mode_of);

    bool is_closed(std::uint64_t window_index, FiringMode mode) const;

    /// Hands back entries buffered as Early so they can be offered again.
    std::vector<StreamEntry> take_early();

    const std::map<std::pair<std::string, std::uint64_t>, Accumulator>& accumulators() const { return cells_; }

    struct State {
        ShardId id;
        std::set<GatewayId> gateways;
        std::map<std::pair<std::string, std::uint64_t>, Accumulator> cells;
        std::map<std::uint64_t, std::pair<bool, bool>> closed;  // window -> (watermark, late deadline)
        std::uint64_t closed_below;
        std::vector<StreamEntry> early;
    };
    State state() const;
    static Shard from_state(State state);

private:
    void prune();

    ShardId id_;
    std::set<GatewayId> gateways_;
    std::map<std::pair<std::string, std::uint64_t>, Accumulator> cells_;
    std::map<std::uint64_t, std::pair<bool, bool>> closed_;
    std::uint64_t closed_below_ = 0;  // every window below this index is fully closed
    std::vector<StreamEntry> early_;
};

struct MergeResult {
    std::vector<JoinedOutput> committed;
    std::vector<Incomplete> incomplete;
};

/// Secondary merge across shards. Results for the same (key, window) are
/// combined, keeping the latest entry per stream, so identical outputs from
/// overlapping shards collapse to one and split partials complete each other.
/// Outputs are committed to the operator state; already-committed ids drop.
MergeResult merge_partials(std::vector<FireResult> results, state::OperatorState& operator_state);

}  // namespace lorastream::join
