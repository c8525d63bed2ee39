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

#include <map>
#include <set>
#include <span>
#include <variant>
#include <vector>

namespace lorastream::detection {

enum class DropMethod : std::uint8_t { LateEvent, SequenceGap, BroadcastReconcile };

const char* to_string(DropMethod method);

struct DropVerdict {
    DeviceId device = 0;
    FrameCounter frame_counter = 0;
    DropMethod method = DropMethod::SequenceGap;
    VirtualTime confirmed_at;

    bool operator==(const DropVerdict&) const = default;
};

struct InOrder {
    std::vector<FrameCounter> released;  // buffered successors drained by this message
};
struct GapOpened {
    std::vector<FrameCounter> missing;
};
struct GapFilled {
    FrameCounter frame_counter = 0;
    std::vector<FrameCounter> released;
};
struct Duplicate {};

using SequenceOutcome = std::variant<InOrder, GapOpened, GapFilled, Duplicate>;

struct WatermarkOutcome {
    std::vector<DropVerdict> verdicts;
    std::vector<FrameCounter> released;  // handed to the late-event path
};

/// Expected-next-sequence tracking for one device. Frames that arrive while
/// an earlier counter is missing are held until the gap resolves or the
/// watermark passes.
class SequenceTracker {
public:
    explicit SequenceTracker(DeviceId device = 0, FrameCounter first_expected = 0)
        : device_(device), expected_next_(first_expected)
    {
    }

    SequenceOutcome on_message(FrameCounter frame_counter, VirtualTime at);

    /// Promotes every gap detected at or before the watermark to a verdict.
    /// Throws std::logic_error if the watermark moves backwards.
    WatermarkOutcome on_watermark(VirtualTime watermark);

    DeviceId device() const { return device_; }
    FrameCounter expected_next() const { return expected_next_; }
    const std::map<FrameCounter, VirtualTime>& pending_gaps() const { return pending_gaps_; }
    const std::map<FrameCounter, VirtualTime>& buffered() const { return buffered_; }
    std::uint64_t duplicates() const { return duplicates_; }
    std::optional<VirtualTime> last_watermark() const { return last_watermark_; }

    struct State {
        DeviceId device;
        FrameCounter expected_next;
        std::map<FrameCounter, VirtualTime> pending_gaps;
        std::map<FrameCounter, VirtualTime> buffered;
        std::uint64_t duplicates;
        std::optional<VirtualTime> last_watermark;
    };
    State state() const;
    static SequenceTracker from_state(const State& state);

private:
    std::vector<FrameCounter> release_unblocked();

    DeviceId device_;
    FrameCounter expected_next_;
    std::map<FrameCounter, VirtualTime> pending_gaps_;
    std::map<FrameCounter, VirtualTime> buffered_;
    std::uint64_t duplicates_ = 0;
    std::optional<VirtualTime> last_watermark_;
};

/// Frame counters one gateway observed per device within the current window.
struct SequenceVector {
    GatewayId gateway = 0;
    std::map<DeviceId, std::set<FrameCounter>> seen;

    void add(DeviceId device, FrameCounter frame_counter) { seen[device].insert(frame_counter); }
    void reset() { seen.clear(); }
    const std::set<FrameCounter>& of(DeviceId device) const;
};

/// Every counter some secondary saw that the primary did not.
std::vector<DropVerdict> reconcile_broadcast(const SequenceVector& primary, std::span<const SequenceVector> secondaries,
                                             DeviceId device, VirtualTime at);

enum class Lateness : std::uint8_t { OnTime, Late };

/// Late iff the event belongs before window_end and the watermark has
/// strictly passed window_end. A watermark equal to window_end is on time.
Lateness classify_late(VirtualTime event_time, VirtualTime window_end, VirtualTime watermark);

}  // namespace lorastream::detection
