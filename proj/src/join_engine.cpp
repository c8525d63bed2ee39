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

#include "lorastream/join_engine.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace lorastream::join {

const char* to_string(FiringMode mode)
{
    switch (mode) {
    case FiringMode::AllowEarly: return "allow-early";
    case FiringMode::OnTime: return "on-time";
    case FiringMode::AllowLate: return "allow-late";
    }
    return "?";
}

const char* to_string(OfferOutcome outcome)
{
    switch (outcome) {
    case OfferOutcome::Accepted: return "accepted";
    case OfferOutcome::Early: return "early";
    case OfferOutcome::Late: return "late";
    case OfferOutcome::StaleRejected: return "stale-rejected";
    case OfferOutcome::AlreadyFired: return "already-fired";
    }
    return "?";
}

FiringMode firing_policy(double d1, double d2, double threshold)
{
    if (d1 > threshold && d2 > threshold) {
        return FiringMode::AllowLate;
    }
    if (d1 <= threshold && d2 <= threshold) {
        return FiringMode::AllowEarly;
    }
    return FiringMode::OnTime;
}

OutputId make_output_id(const std::string& key, const EntityId& entity1, const EntityId& entity2,
                        VirtualTime window_end)
{
    std::vector<std::uint8_t> bytes(key.begin(), key.end());
    bytes.push_back(0);
    auto put = [&bytes](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffU));
        }
    };
    put(entity1.device);
    put(entity1.counter);
    put(entity2.device);
    put(entity2.counter);
    put(static_cast<std::uint64_t>(window_end.ticks));
    return state::fnv1a64(bytes);
}

namespace {

FireResult combine(const std::string& key, std::uint64_t window_index, VirtualTime window_end,
                   const std::optional<Slot>& slot1, const std::optional<Slot>& slot2, VirtualTime at)
{
    if (!slot1 || !slot2) {
        Incomplete incomplete{key, window_index, window_end, slot1, slot2, {}, at};
        if (!slot1) {
            incomplete.missing_streams.push_back(1);
        }
        if (!slot2) {
            incomplete.missing_streams.push_back(2);
        }
        return incomplete;
    }
    return JoinedOutput{key,
                        window_index,
                        slot1->value,
                        slot2->value,
                        slot1->entity,
                        slot2->entity,
                        slot1->event_time,
                        slot2->event_time,
                        window_end,
                        make_output_id(key, slot1->entity, slot2->entity, window_end),
                        at};
}

bool newer(const std::optional<Slot>& candidate, const std::optional<Slot>& current)
{
    if (!candidate) {
        return false;
    }
    if (!current) {
        return true;
    }
    if (candidate->event_time != current->event_time) {
        return candidate->event_time > current->event_time;
    }
    return candidate->entity > current->entity;
}

}  // namespace

FireResult fire(Accumulator& accumulator, FireReason reason, VirtualTime at)
{
    if (accumulator.fired) {
        return NoOp{};
    }
    if (reason == FireReason::EarlyComplete && !accumulator.complete()) {
        throw std::logic_error("early firing requires both stream slots");
    }
    accumulator.fired = true;
    return combine(accumulator.key, accumulator.window_index, accumulator.window_end(), accumulator.slot1,
                   accumulator.slot2, at);
}

Shard::Shard(ShardId id, std::set<GatewayId> gateways) : id_(id), gateways_(std::move(gateways))
{
    if (gateways_.empty()) {
        throw std::invalid_argument("shard " + std::to_string(id) + " consumes from no gateway");
    }
}

bool Shard::is_closed(std::uint64_t window_index, FiringMode mode) const
{
    if (window_index < closed_below_) {
        return true;
    }
    auto it = closed_.find(window_index);
    if (it == closed_.end()) {
        return false;
    }
    return mode == FiringMode::AllowLate ? it->second.second : it->second.first;
}

OfferResult Shard::offer(const StreamEntry& entry, const std::optional<WindowSpan>& window, FiringMode mode,
                         const state::OperatorState& operator_state, VirtualTime now, OfferOptions options)
{
    if (entry.stream != 1 && entry.stream != 2) {
        throw std::invalid_argument("stream id must be 1 or 2");
    }
    if (operator_state.is_processed(entry.entity)) {
        return {OfferOutcome::StaleRejected, std::nullopt};
    }
    if (!window) {
        early_.push_back(entry);
        return {OfferOutcome::Early, std::nullopt};
    }
    if (!window->contains(entry.event_time)) {
        throw std::logic_error("offer: window does not cover the entry's event time");
    }
    if (is_closed(window->index, mode)) {
        return {OfferOutcome::Late, std::nullopt};
    }

    auto [it, inserted] = cells_.try_emplace({entry.key, window->index});
    auto& cell = it->second;
    if (inserted) {
        cell.key = entry.key;
        cell.window_index = window->index;
        cell.min_allowed_ts = window->start;
        cell.max_allowed_ts = window->end - 1;
    }
    if (cell.fired) {
        return {OfferOutcome::AlreadyFired, std::nullopt};
    }

    auto& slot = entry.stream == 1 ? cell.slot1 : cell.slot2;
    if (!slot || entry.event_time > slot->event_time) {
        slot = Slot{entry.entity, entry.value, entry.event_time};
    }

    OfferResult result{OfferOutcome::Accepted, std::nullopt};
    if (options.fire_early_locally && mode == FiringMode::AllowEarly && cell.complete()) {
        auto fired = fire(cell, FireReason::EarlyComplete, now);
        if (auto* output = std::get_if<JoinedOutput>(&fired)) {
            result.early_output = std::move(*output);
        }
    }
    return result;
}

FireResult Shard::fire_early(const std::string& key, std::uint64_t window_index, VirtualTime now)
{
    auto it = cells_.find({key, window_index});
    if (it == cells_.end()) {
        return NoOp{};
    }
    auto& cell = it->second;
    return fire(cell, cell.complete() ? FireReason::EarlyComplete : FireReason::Watermark, now);
}

const Accumulator* Shard::cell(const std::string& key, std::uint64_t window_index) const
{
    auto it = cells_.find({key, window_index});
    return it == cells_.end() ? nullptr : &it->second;
}

std::vector<FireResult> Shard::close_window(std::uint64_t window_index, FireReason reason, VirtualTime now,
                                            const std::function<FiringMode(const std::string&)>& mode_of)
{
    if (reason == FireReason::EarlyComplete) {
        throw std::invalid_argument("close_window: EarlyComplete is not a closing");
    }
    const bool late_closing = reason == FireReason::LateDeadline;
    if (window_index >= closed_below_) {
        auto& flags = closed_[window_index];
        (late_closing ? flags.second : flags.first) = true;
    }

    std::vector<FireResult> results;
    for (auto& [_, cell] : cells_) {
        if (cell.window_index != window_index || cell.fired) {
            continue;
        }
        const bool is_late_cell = mode_of(cell.key) == FiringMode::AllowLate;
        if (is_late_cell != late_closing) {
            continue;
        }
        results.push_back(fire(cell, reason, now));
    }
    prune();
    return results;
}

void Shard::prune()
{
    while (true) {
        auto it = closed_.find(closed_below_);
        if (it == closed_.end() || !it->second.first || !it->second.second) {
            break;
        }
        const auto index = closed_below_;
        std::erase_if(cells_, [index](const auto& cell) { return cell.second.window_index == index; });
        closed_.erase(it);
        ++closed_below_;
    }
}

std::vector<StreamEntry> Shard::take_early()
{
    std::vector<StreamEntry> out;
    out.swap(early_);
    return out;
}

Shard::State Shard::state() const
{
    return State{id_, gateways_, cells_, closed_, closed_below_, early_};
}

Shard Shard::from_state(State state)
{
    Shard shard(state.id, std::move(state.gateways));
    shard.cells_ = std::move(state.cells);
    shard.closed_ = std::move(state.closed);
    shard.closed_below_ = state.closed_below;
    shard.early_ = std::move(state.early);
    return shard;
}

MergeResult merge_partials(std::vector<FireResult> results, state::OperatorState& operator_state)
{
    struct Group {
        std::string key;
        std::uint64_t window_index = 0;
        VirtualTime window_end;
        std::optional<Slot> slot1;
        std::optional<Slot> slot2;
        VirtualTime at;
    };
    std::vector<Group> groups;
    std::map<std::pair<std::string, std::uint64_t>, std::size_t> index;

    auto group_for = [&](const std::string& key, std::uint64_t window, VirtualTime end, VirtualTime at) -> Group& {
        auto [it, inserted] = index.try_emplace({key, window}, groups.size());
        if (inserted) {
            groups.push_back(Group{key, window, end, std::nullopt, std::nullopt, at});
        }
        auto& group = groups[it->second];
        group.at = std::min(group.at, at);
        return group;
    };
    auto absorb = [](Group& group, const std::optional<Slot>& s1, const std::optional<Slot>& s2) {
        if (newer(s1, group.slot1)) {
            group.slot1 = s1;
        }
        if (newer(s2, group.slot2)) {
            group.slot2 = s2;
        }
    };

    for (const auto& result : results) {
        if (const auto* output = std::get_if<JoinedOutput>(&result)) {
            auto& group = group_for(output->key, output->window_index, output->window_end, output->produced_at);
            absorb(group, Slot{output->entity1, output->value1, output->event_time1},
                   Slot{output->entity2, output->value2, output->event_time2});
        }
        else if (const auto* partial = std::get_if<Incomplete>(&result)) {
            auto& group = group_for(partial->key, partial->window_index, partial->window_end, partial->at);
            absorb(group, partial->slot1, partial->slot2);
        }
    }

    MergeResult merged;
    for (const auto& group : groups) {
        auto combined = combine(group.key, group.window_index, group.window_end, group.slot1, group.slot2, group.at);
        if (auto* output = std::get_if<JoinedOutput>(&combined)) {
            const EntityId entities[2] = {output->entity1, output->entity2};
            const state::CommittedValue value{output->output_id, output->value1, output->value2, output->window_end};
            if (operator_state.commit(output->output_id, output->key, entities, value)) {
                merged.committed.push_back(std::move(*output));
            }
        }
        else {
            merged.incomplete.push_back(std::get<Incomplete>(std::move(combined)));
        }
    }
    return merged;
}

}  // namespace lorastream::join
