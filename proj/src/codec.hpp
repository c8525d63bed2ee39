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

// JSON conversions for engine state persisted in snapshot sections.

#include "lorastream/adr.hpp"
#include "lorastream/detection.hpp"
#include "lorastream/join_engine.hpp"
#include "lorastream/recovery.hpp"
#include "lorastream/windowing.hpp"

#include <json.hpp>

#include <optional>

NLOHMANN_JSON_NAMESPACE_BEGIN
template <class T>
struct adl_serializer<std::optional<T>> {
    static void to_json(json& j, const std::optional<T>& value)
    {
        if (value) {
            j = *value;
        }
        else {
            j = nullptr;
        }
    }
    static void from_json(const json& j, std::optional<T>& value)
    {
        if (j.is_null()) {
            value.reset();
        }
        else {
            value = j.get<T>();
        }
    }
};
NLOHMANN_JSON_NAMESPACE_END

namespace lorastream {

inline void to_json(nlohmann::json& j, const VirtualTime& t)
{
    j = t.ticks;
}
inline void from_json(const nlohmann::json& j, VirtualTime& t)
{
    t.ticks = j.get<std::int64_t>();
}

}  // namespace lorastream

namespace lorastream::state {

inline void to_json(nlohmann::json& j, const EntityId& id)
{
    j = nlohmann::json::array({id.device, id.counter});
}
inline void from_json(const nlohmann::json& j, EntityId& id)
{
    id.device = j.at(0).get<DeviceId>();
    id.counter = j.at(1).get<FrameCounter>();
}

}  // namespace lorastream::state

namespace lorastream::join {

inline void to_json(nlohmann::json& j, const Slot& s)
{
    j = {{"entity", s.entity}, {"value", s.value}, {"event_time", s.event_time}};
}
inline void from_json(const nlohmann::json& j, Slot& s)
{
    j.at("entity").get_to(s.entity);
    j.at("value").get_to(s.value);
    j.at("event_time").get_to(s.event_time);
}

inline void to_json(nlohmann::json& j, const Accumulator& a)
{
    j = {{"key", a.key},     {"window", a.window_index}, {"min", a.min_allowed_ts}, {"max", a.max_allowed_ts},
         {"slot1", a.slot1}, {"slot2", a.slot2},         {"fired", a.fired}};
}
inline void from_json(const nlohmann::json& j, Accumulator& a)
{
    j.at("key").get_to(a.key);
    j.at("window").get_to(a.window_index);
    j.at("min").get_to(a.min_allowed_ts);
    j.at("max").get_to(a.max_allowed_ts);
    j.at("slot1").get_to(a.slot1);
    j.at("slot2").get_to(a.slot2);
    j.at("fired").get_to(a.fired);
}

inline void to_json(nlohmann::json& j, const StreamEntry& e)
{
    j = {{"key", e.key},   {"stream", e.stream},         {"entity", e.entity},  {"value", e.value},
         {"event_time", e.event_time}, {"arrived_at", e.arrived_at}, {"gateway", e.gateway}};
}
inline void from_json(const nlohmann::json& j, StreamEntry& e)
{
    j.at("key").get_to(e.key);
    j.at("stream").get_to(e.stream);
    j.at("entity").get_to(e.entity);
    j.at("value").get_to(e.value);
    j.at("event_time").get_to(e.event_time);
    j.at("arrived_at").get_to(e.arrived_at);
    j.at("gateway").get_to(e.gateway);
}

inline void to_json(nlohmann::json& j, const WindowSpan& w)
{
    j = {{"index", w.index}, {"start", w.start}, {"end", w.end}};
}
inline void from_json(const nlohmann::json& j, WindowSpan& w)
{
    j.at("index").get_to(w.index);
    j.at("start").get_to(w.start);
    j.at("end").get_to(w.end);
}

inline void to_json(nlohmann::json& j, const Shard::State& s)
{
    j = {{"id", s.id},
         {"gateways", s.gateways},
         {"cells", s.cells},
         {"closed", s.closed},
         {"closed_below", s.closed_below},
         {"early", s.early}};
}
inline void from_json(const nlohmann::json& j, Shard::State& s)
{
    j.at("id").get_to(s.id);
    j.at("gateways").get_to(s.gateways);
    j.at("cells").get_to(s.cells);
    j.at("closed").get_to(s.closed);
    j.at("closed_below").get_to(s.closed_below);
    j.at("early").get_to(s.early);
}

}  // namespace lorastream::join

namespace lorastream::detection {

inline void to_json(nlohmann::json& j, const SequenceTracker::State& s)
{
    j = {{"device", s.device},
         {"expected_next", s.expected_next},
         {"pending_gaps", s.pending_gaps},
         {"buffered", s.buffered},
         {"duplicates", s.duplicates},
         {"last_watermark", s.last_watermark}};
}
inline void from_json(const nlohmann::json& j, SequenceTracker::State& s)
{
    j.at("device").get_to(s.device);
    j.at("expected_next").get_to(s.expected_next);
    j.at("pending_gaps").get_to(s.pending_gaps);
    j.at("buffered").get_to(s.buffered);
    j.at("duplicates").get_to(s.duplicates);
    j.at("last_watermark").get_to(s.last_watermark);
}

inline void to_json(nlohmann::json& j, const SequenceVector& v)
{
    j = {{"gateway", v.gateway}, {"seen", v.seen}};
}
inline void from_json(const nlohmann::json& j, SequenceVector& v)
{
    j.at("gateway").get_to(v.gateway);
    j.at("seen").get_to(v.seen);
}

}  // namespace lorastream::detection

namespace lorastream::windowing {

inline void to_json(nlohmann::json& j, const WindowRecord& r)
{
    j = {{"size", r.size}, {"messages", r.messages}, {"late", r.late_entries}, {"latency", r.observed_latency}};
}
inline void from_json(const nlohmann::json& j, WindowRecord& r)
{
    j.at("size").get_to(r.size);
    j.at("messages").get_to(r.messages);
    j.at("late").get_to(r.late_entries);
    j.at("latency").get_to(r.observed_latency);
}

}  // namespace lorastream::windowing

namespace lorastream::adr {

inline void to_json(nlohmann::json& j, const AdrRecord& r)
{
    j = {{"fc", r.frame_counter}, {"snr_max", r.snr_max}, {"diversity", r.gtw_diversity}};
}
inline void from_json(const nlohmann::json& j, AdrRecord& r)
{
    j.at("fc").get_to(r.frame_counter);
    j.at("snr_max").get_to(r.snr_max);
    j.at("diversity").get_to(r.gtw_diversity);
}

}  // namespace lorastream::adr

namespace lorastream::recovery {

inline void to_json(nlohmann::json& j, const QuorumAssignment& q)
{
    j = {{"node", q.node}, {"gateways", q.gateways}};
}
inline void from_json(const nlohmann::json& j, QuorumAssignment& q)
{
    j.at("node").get_to(q.node);
    j.at("gateways").get_to(q.gateways);
}

inline void to_json(nlohmann::json& j, const ProbeLeg& l)
{
    j = {{"gateway", l.gateway}, {"id", l.correlation_id}, {"sent_at", l.sent_at}, {"responded_at", l.responded_at}};
}
inline void from_json(const nlohmann::json& j, ProbeLeg& l)
{
    j.at("gateway").get_to(l.gateway);
    j.at("id").get_to(l.correlation_id);
    j.at("sent_at").get_to(l.sent_at);
    j.at("responded_at").get_to(l.responded_at);
}

inline void to_json(nlohmann::json& j, const ProbeRound& r)
{
    j = {{"round", r.round_index}, {"first", r.first}, {"second", r.second}};
}
inline void from_json(const nlohmann::json& j, ProbeRound& r)
{
    j.at("round").get_to(r.round_index);
    j.at("first").get_to(r.first);
    j.at("second").get_to(r.second);
}

inline void to_json(nlohmann::json& j, const ProbeCycle::State& s)
{
    j = {{"quorum", s.quorum},         {"started_at", s.started_at}, {"deadline", s.deadline},
         {"rounds", s.rounds},         {"unknown", s.unknown},       {"duplicates", s.duplicates}};
}
inline void from_json(const nlohmann::json& j, ProbeCycle::State& s)
{
    j.at("quorum").get_to(s.quorum);
    j.at("started_at").get_to(s.started_at);
    j.at("deadline").get_to(s.deadline);
    j.at("rounds").get_to(s.rounds);
    j.at("unknown").get_to(s.unknown);
    j.at("duplicates").get_to(s.duplicates);
}

}  // namespace lorastream::recovery
