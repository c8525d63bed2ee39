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

#include "lorastream/detection.hpp"

#include <stdexcept>

namespace lorastream::detection {

const char* to_string(DropMethod method)
{
    switch (method) {
    case DropMethod::LateEvent: return "late-event";
    case DropMethod::SequenceGap: return "sequence-gap";
    case DropMethod::BroadcastReconcile: return "broadcast-reconcile";
    }
    return "?";
}

std::vector<FrameCounter> SequenceTracker::release_unblocked()
{
    std::vector<FrameCounter> released;
    const auto lowest_gap = pending_gaps_.empty() ? std::optional<FrameCounter>{} : pending_gaps_.begin()->first;
    for (auto it = buffered_.begin(); it != buffered_.end();) {
        if (lowest_gap && it->first > *lowest_gap) {
            break;
        }
        released.push_back(it->first);
        it = buffered_.erase(it);
    }
    return released;
}

SequenceOutcome SequenceTracker::on_message(FrameCounter frame_counter, VirtualTime at)
{
    if (frame_counter == expected_next_) {
        ++expected_next_;
        if (!pending_gaps_.empty()) {
            buffered_.emplace(frame_counter, at);
            return InOrder{};
        }
        return InOrder{release_unblocked()};
    }
    if (frame_counter > expected_next_) {
        GapOpened opened;
        for (FrameCounter missing = expected_next_; missing < frame_counter; ++missing) {
            pending_gaps_.emplace(missing, at);
            opened.missing.push_back(missing);
        }
        buffered_.emplace(frame_counter, at);
        expected_next_ = frame_counter + 1;
        return opened;
    }
    if (pending_gaps_.erase(frame_counter) == 1) {
        return GapFilled{frame_counter, release_unblocked()};
    }
    ++duplicates_;
    return Duplicate{};
}

WatermarkOutcome SequenceTracker::on_watermark(VirtualTime watermark)
{
    if (last_watermark_ && watermark < *last_watermark_) {
        throw std::logic_error("on_watermark: watermark moved backwards");
    }
    last_watermark_ = watermark;

    WatermarkOutcome outcome;
    for (auto it = pending_gaps_.begin(); it != pending_gaps_.end();) {
        if (it->second <= watermark) {
            outcome.verdicts.push_back(DropVerdict{device_, it->first, DropMethod::SequenceGap, watermark});
            it = pending_gaps_.erase(it);
        }
        else {
            ++it;
        }
    }
    outcome.released = release_unblocked();
    for (auto it = buffered_.begin(); it != buffered_.end();) {
        if (it->second <= watermark) {
            outcome.released.push_back(it->first);
            it = buffered_.erase(it);
        }
        else {
            ++it;
        }
    }
    return outcome;
}

SequenceTracker::State SequenceTracker::state() const
{
    return State{device_, expected_next_, pending_gaps_, buffered_, duplicates_, last_watermark_};
}

SequenceTracker SequenceTracker::from_state(const State& state)
{
    SequenceTracker tracker(state.device, state.expected_next);
    tracker.pending_gaps_ = state.pending_gaps;
    tracker.buffered_ = state.buffered;
    tracker.duplicates_ = state.duplicates;
    tracker.last_watermark_ = state.last_watermark;
    return tracker;
}

const std::set<FrameCounter>& SequenceVector::of(DeviceId device) const
{
    static const std::set<FrameCounter> empty;
    auto it = seen.find(device);
    return it == seen.end() ? empty : it->second;
}

std::vector<DropVerdict> reconcile_broadcast(const SequenceVector& primary, std::span<const SequenceVector> secondaries,
                                             DeviceId device, VirtualTime at)
{
    std::set<FrameCounter> union_of_secondaries;
    for (const auto& vector : secondaries) {
        const auto& counters = vector.of(device);
        union_of_secondaries.insert(counters.begin(), counters.end());
    }
    const auto& primary_counters = primary.of(device);
    std::vector<DropVerdict> verdicts;
    for (FrameCounter counter : union_of_secondaries) {
        if (!primary_counters.contains(counter)) {
            verdicts.push_back(DropVerdict{device, counter, DropMethod::BroadcastReconcile, at});
        }
    }
    return verdicts;
}

Lateness classify_late(VirtualTime event_time, VirtualTime window_end, VirtualTime watermark)
{
    return event_time < window_end && watermark > window_end ? Lateness::Late : Lateness::OnTime;
}

}  // namespace lorastream::detection
