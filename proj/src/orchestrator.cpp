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

#include "lorastream/orchestrator.hpp"

#include "codec.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <tuple>

namespace lorastream {

using nlohmann::json;

namespace {

enum class TimerKind : std::uint8_t { WindowEnd, Watermark, LateDeadline, ProbeDeadline };

struct Timer {
    VirtualTime deadline;
    std::uint64_t seq = 0;
    TimerKind kind = TimerKind::WindowEnd;
    std::uint64_t window = 0;
    DeviceId device = 0;
};

struct TimerOrder {
    bool operator()(const Timer& a, const Timer& b) const
    {
        return std::tie(a.deadline, a.seq) < std::tie(b.deadline, b.seq);
    }
};

void to_json(json& j, const Timer& t)
{
    j = json::array({t.deadline.ticks, t.seq, static_cast<int>(t.kind), t.window, t.device});
}

void from_json(const json& j, Timer& t)
{
    t.deadline = at_ms(j.at(0).get<std::int64_t>());
    t.seq = j.at(1).get<std::uint64_t>();
    t.kind = static_cast<TimerKind>(j.at(2).get<int>());
    t.window = j.at(3).get<std::uint64_t>();
    t.device = j.at(4).get<DeviceId>();
}

/// A content entry counted toward its window's statistics. `done` is set
/// when the entry was settled on arrival; otherwise its cell's firing settles it.
struct EntryStat {
    std::string key;
    VirtualTime event_time;
    std::optional<VirtualTime> done;
};

void to_json(json& j, const EntryStat& e)
{
    j = {{"key", e.key}, {"event_time", e.event_time}, {"done", e.done}};
}

void from_json(const json& j, EntryStat& e)
{
    j.at("key").get_to(e.key);
    j.at("event_time").get_to(e.event_time);
    j.at("done").get_to(e.done);
}

/// Per-window bookkeeping kept until the window's watermark passes.
struct WindowBook {
    std::map<GatewayId, detection::SequenceVector> vectors;
    detection::SequenceVector consumed;
    std::map<DeviceId, std::map<FrameCounter, std::map<GatewayId, double>>> snrs;
    std::map<state::EntityId, EntryStat> entries;
    std::map<std::string, VirtualTime> fired_at;
};

void to_json(json& j, const WindowBook& b)
{
    j = {{"vectors", b.vectors},
         {"consumed", b.consumed},
         {"snrs", b.snrs},
         {"entries", b.entries},
         {"fired_at", b.fired_at}};
}

void from_json(const json& j, WindowBook& b)
{
    j.at("vectors").get_to(b.vectors);
    j.at("consumed").get_to(b.consumed);
    j.at("snrs").get_to(b.snrs);
    j.at("entries").get_to(b.entries);
    j.at("fired_at").get_to(b.fired_at);
}

json output_json(const join::JoinedOutput& o)
{
    return {{"id", o.output_id},
            {"key", o.key},
            {"window", o.window_index},
            {"value1", o.value1},
            {"value2", o.value2},
            {"entity1", o.entity1},
            {"entity2", o.entity2},
            {"event_time1", o.event_time1},
            {"event_time2", o.event_time2},
            {"window_end", o.window_end},
            {"produced_at", o.produced_at}};
}

std::vector<std::uint8_t> to_bytes(const json& j)
{
    return json::to_cbor(j);
}

json from_bytes(const state::Snapshot& snapshot, std::string_view section)
{
    const auto* bytes = snapshot.section(section);
    if (bytes == nullptr) {
        throw state::CorruptSnapshot("snapshot lacks section '" + std::string(section) + "'");
    }
    try {
        return json::from_cbor(*bytes);
    }
    catch (const json::exception& e) {
        throw state::CorruptSnapshot("section '" + std::string(section) + "': " + e.what());
    }
}

}  // namespace

EngineConfig EngineConfig::from_scenario(const Scenario& s)
{
    EngineConfig c;
    for (const auto& d : s.devices) {
        c.devices[d.id] = DeviceInfo{d.id, d.device_class, d.position, d.stream, d.key, s.quorum_of(d.id)};
    }
    for (const auto& g : s.gateways) {
        c.gateways[g.id] = g.position;
    }
    c.window = s.window;
    c.watermark_delay_ms = s.watermark_delay_ms;
    c.base_composite_window = s.base_composite_window();
    c.data_rates = s.data_rates;
    c.initial_rate_index = s.initial_rate_index;
    c.firing_threshold_m = s.firing_threshold_m;
    c.shards = s.effective_shards();
    c.checkpoint_interval_windows = s.checkpoint_interval_windows;
    c.checkpoint_failures = s.faults.checkpoint_failures;
    return c;
}

void OutputSink::write_jsonl(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& o : outputs_) {
        out << output_json(o).dump() << '\n';
    }
}

struct Orchestrator::Impl {
    Impl(EngineConfig cfg, state::SnapshotStore& st, const Journal& j, EventLog& l, OutputSink& s)
        : config(std::move(cfg)), store(st), journal(j), log(l), sink(s),
          controller(config.base_composite_window)
    {
        for (const auto& [id, info] : config.devices) {
            auto& pair = key_devices[info.key];
            (info.stream == 1 ? pair.first : pair.second) = id;
        }
        reset();
    }

    // Configuration and collaborators.
    EngineConfig config;
    state::SnapshotStore& store;
    const Journal& journal;
    EventLog& log;
    OutputSink& sink;
    std::function<void(const ProbeCommand&)> command_handler;
    std::map<std::string, std::pair<DeviceId, DeviceId>> key_devices;

    // Execution context, not part of the persisted state.
    bool replaying = false;
    std::size_t current_offset = 0;
    std::size_t snapshot_offset = 0;
    std::vector<join::JoinedOutput> pending;
    std::vector<std::vector<state::Channel<join::StreamEntry>>> channels;

    // Persisted state.
    VirtualTime now;
    std::set<Timer, TimerOrder> timers;
    std::uint64_t timer_seq = 0;
    std::deque<join::WindowSpan> windows;  // open and not yet fully closed, by index
    std::set<std::uint64_t> late_closed;     // closed windows still queued behind an open one
    std::uint64_t watermarks_done = 0;
    std::map<std::uint64_t, WindowBook> books;
    std::uint64_t late_since_watermark = 0;
    windowing::WindowController controller;
    std::map<DeviceId, detection::SequenceTracker> trackers;
    std::map<DeviceId, adr::AdrTable> adr_tables;
    std::map<DeviceId, std::pair<int, int>> rate_power;
    std::map<DeviceId, std::vector<std::pair<VirtualTime, GatewayId>>> elections;
    std::map<DeviceId, recovery::ProbeCycle> probes;
    std::map<DeviceId, FrameCounter> class_a_dispatched;
    recovery::CorrelationIdIssuer issuer;
    std::set<std::pair<std::string, std::uint64_t>> early_fired;
    std::set<std::tuple<DeviceId, FrameCounter, int>> verdicts;
    std::uint64_t checkpoint_attempts = 0;
    std::map<std::string, std::uint64_t> counters;
    state::OperatorState op;
    std::vector<join::Shard> shards;

    void reset()
    {
        pending.clear();
        now = VirtualTime{};
        timers.clear();
        timer_seq = 0;
        windows.clear();
        late_closed.clear();
        watermarks_done = 0;
        books.clear();
        late_since_watermark = 0;
        controller = windowing::WindowController(config.base_composite_window);
        trackers.clear();
        adr_tables.clear();
        rate_power.clear();
        for (const auto& [id, _] : config.devices) {
            trackers.emplace(id, detection::SequenceTracker(id));
            adr_tables.emplace(id, adr::AdrTable(id));
            rate_power[id] = {config.initial_rate_index, 0};
        }
        elections.clear();
        probes.clear();
        class_a_dispatched.clear();
        issuer = recovery::CorrelationIdIssuer();
        early_fired.clear();
        verdicts.clear();
        checkpoint_attempts = 0;
        counters.clear();
        op = state::OperatorState();
        shards.clear();
        channels.clear();
        for (const auto& spec : config.shards) {
            shards.emplace_back(spec.id, spec.gateways);
            channels.emplace_back(spec.gateways.size());
        }
    }

    const DeviceInfo& info(DeviceId device) const
    {
        auto it = config.devices.find(device);
        if (it == config.devices.end()) {
            throw InternalBreach("input for unknown device " + std::to_string(device));
        }
        return it->second;
    }

    void schedule(VirtualTime deadline, TimerKind kind, std::uint64_t window, DeviceId device = 0)
    {
        timers.insert(Timer{deadline, timer_seq++, kind, window, device});
    }

    // ---- time ---------------------------------------------------------------

    void advance(VirtualTime t)
    {
        while (!timers.empty() && timers.begin()->deadline < t) {
            const Timer timer = *timers.begin();
            timers.erase(timers.begin());
            now = timer.deadline;
            switch (timer.kind) {
            case TimerKind::WindowEnd: open_window(timer.window + 1, span_of(timer.window).end); break;
            case TimerKind::Watermark: on_watermark(timer.window); break;
            case TimerKind::LateDeadline: on_late_deadline(timer.window); break;
            case TimerKind::ProbeDeadline: on_probe_deadline(timer.device); break;
            }
        }
        now = std::max(now, t);
    }

    void consume(std::size_t offset)
    {
        const auto& entry = journal.at(offset);
        if (entry.at < now) {
            throw InternalBreach("journal entry " + std::to_string(offset) + " lies before the engine clock");
        }
        current_offset = offset;
        advance(entry.at);
        std::visit(
            [this](const auto& input) {
                using T = std::decay_t<decltype(input)>;
                if constexpr (std::is_same_v<T, ReceptionInput>) {
                    on_reception(input);
                }
                else if constexpr (std::is_same_v<T, ProbeEchoInput>) {
                    on_echo(input);
                }
            },
            entry.input);
    }

    // ---- windows ------------------------------------------------------------

    /// Index of the window covering t: a retained window, the next one to
    /// open, or nullopt when t falls in a window already fully closed.
    std::optional<std::uint64_t> window_index_for(VirtualTime t) const
    {
        if (t.ticks < 0) {
            throw InternalBreach("negative event time");
        }
        if (t < windows.front().start) {
            return std::nullopt;
        }
        if (t >= windows.back().end) {
            return next_index();
        }
        auto it = std::upper_bound(windows.begin(), windows.end(), t,
                                   [](VirtualTime v, const join::WindowSpan& w) { return v < w.start; });
        return std::prev(it)->index;
    }

    std::uint64_t next_index() const { return windows.back().index + 1; }
    bool is_open(std::uint64_t index) const { return index < next_index(); }
    const join::WindowSpan& span_of(std::uint64_t index) const
    {
        return windows.at(static_cast<std::size_t>(index - windows.front().index));
    }

    VirtualTime window_start(std::uint64_t index) const
    {
        return is_open(index) ? span_of(index).start : windows.back().end;
    }

    void open_window(std::uint64_t index, VirtualTime start)
    {
        const Millis size = controller.current_size();
        const join::WindowSpan span{index, start, start + size};
        windows.push_back(span);
        schedule(span.end, TimerKind::WindowEnd, index);
        schedule(span.end + config.watermark_delay_ms, TimerKind::Watermark, index);
        schedule(span.end + config.watermark_delay_ms + size, TimerKind::LateDeadline, index);
        log.emit(now, "window_open", {{"index", index}, {"start", span.start}, {"end", span.end}, {"size", size}});

        for (std::size_t i = 0; i < shards.size(); ++i) {
            for (const auto& entry : shards[i].take_early()) {
                route(entry, i);
            }
        }
    }

    // ---- primaries and firing modes ----------------------------------------

    GatewayId primary_at(DeviceId device, VirtualTime t) const
    {
        GatewayId primary = info(device).quorum.gateways.front();
        auto it = elections.find(device);
        if (it != elections.end()) {
            for (const auto& [decided_at, gateway] : it->second) {
                if (decided_at < t) {
                    primary = gateway;
                }
            }
        }
        return primary;
    }

    double distance_to_primary(DeviceId device, VirtualTime t) const
    {
        return distance(info(device).position, config.gateways.at(primary_at(device, t)));
    }

    join::FiringMode mode_for(const std::string& key, std::uint64_t window) const
    {
        const auto& [d1, d2] = key_devices.at(key);
        const auto start = window_start(window);
        return join::firing_policy(distance_to_primary(d1, start), distance_to_primary(d2, start),
                                   config.firing_threshold_m);
    }

    // ---- inputs -------------------------------------------------------------

    void on_reception(const ReceptionInput& r)
    {
        const auto& device = info(r.device);
        if (r.sent_at > now) {
            throw InternalBreach("reception arrived before it was sent");
        }
        if (std::find(device.quorum.gateways.begin(), device.quorum.gateways.end(), r.gateway) ==
            device.quorum.gateways.end()) {
            throw InternalBreach("reception through a gateway outside the device's quorum");
        }
        ++counters["receptions"];

        const auto index = window_index_for(r.sent_at);
        if (index && *index >= watermarks_done) {
            auto& book = books[*index];
            auto& vector = book.vectors[r.gateway];
            vector.gateway = r.gateway;
            vector.add(r.device, r.frame_counter);
            book.snrs[r.device][r.frame_counter][r.gateway] = r.snr_db;
        }

        maybe_dispatch_class_a(r.device, r.frame_counter);

        if (r.gateway != primary_at(r.device, r.sent_at)) {
            return;
        }
        ++counters["content_receptions"];
        const auto outcome = trackers.at(r.device).on_message(r.frame_counter, now);
        if (std::holds_alternative<detection::Duplicate>(outcome)) {
            ++counters["duplicate_receptions"];
        }
        if (index && *index >= watermarks_done) {
            books[*index].consumed.add(r.device, r.frame_counter);
        }
        route(join::StreamEntry{device.key, device.stream, state::EntityId{r.device, r.frame_counter}, r.payload.value,
                                r.sent_at, now, r.gateway},
              std::nullopt);
    }

    void route(const join::StreamEntry& entry, std::optional<std::size_t> only_shard)
    {
        const auto found = window_index_for(entry.event_time);
        if (!found) {
            ++late_since_watermark;
            ++counters["offers_late"];
            emit_verdict(entry.entity.device, entry.entity.counter, detection::DropMethod::LateEvent);
            return;
        }
        const auto index = *found;
        std::optional<join::WindowSpan> span;
        if (is_open(index)) {
            span = span_of(index);
        }
        const auto mode = mode_for(entry.key, index);

        bool late = false;
        if (span && !only_shard) {
            late = detection::classify_late(entry.event_time, span->end, now - config.watermark_delay_ms) ==
                   detection::Lateness::Late;
            if (late) {
                ++late_since_watermark;
                emit_verdict(entry.entity.device, entry.entity.counter, detection::DropMethod::LateEvent);
            }
        }
        if (early_fired.contains({entry.key, index})) {
            ++counters["offers_already-fired"];
            if (!late && index >= watermarks_done) {
                books[index].entries.try_emplace(entry.entity, EntryStat{entry.key, entry.event_time, now});
            }
            return;
        }

        bool accepted = false;
        for (std::size_t i = 0; i < shards.size(); ++i) {
            if ((only_shard && *only_shard != i) || !shards[i].consumes(entry.gateway)) {
                continue;
            }
            const auto outcome = deliver(i, entry, span, mode);
            ++counters[std::string("offers_") + join::to_string(outcome)];
            if (outcome == join::OfferOutcome::Late && !late) {
                throw InternalBreach("shard reports a late entry that detection classified on time");
            }
            if (late && mode != join::FiringMode::AllowLate && outcome != join::OfferOutcome::Late &&
                outcome != join::OfferOutcome::StaleRejected) {
                throw InternalBreach("detection classified an entry late that the shard accepted");
            }
            if (outcome == join::OfferOutcome::Accepted) {
                accepted = true;
                if (index >= watermarks_done) {
                    books[index].entries.try_emplace(entry.entity,
                                                     EntryStat{entry.key, entry.event_time, std::nullopt});
                }
            }
        }
        if (accepted && mode == join::FiringMode::AllowEarly) {
            try_early(entry.key, index);
        }
    }

    join::OfferOutcome deliver(std::size_t shard, const join::StreamEntry& entry,
                               const std::optional<join::WindowSpan>& span, join::FiringMode mode)
    {
        auto& channel = channels[shard][channel_index(shard, entry.gateway)];
        channel.push(entry);
        auto element = channel.pop();
        const auto& item = std::get<join::StreamEntry>(element);
        return shards[shard].offer(item, span, mode, op, now, join::OfferOptions{false}).outcome;
    }

    std::size_t channel_index(std::size_t shard, GatewayId gateway) const
    {
        const auto& gws = shards[shard].gateways();
        return static_cast<std::size_t>(std::distance(gws.begin(), gws.find(gateway)));
    }

    void try_early(const std::string& key, std::uint64_t index)
    {
        bool has1 = false;
        bool has2 = false;
        for (const auto& shard : shards) {
            if (const auto* cell = shard.cell(key, index); cell != nullptr && !cell->fired) {
                has1 = has1 || cell->slot1.has_value();
                has2 = has2 || cell->slot2.has_value();
            }
        }
        if (!has1 || !has2) {
            return;
        }
        std::vector<join::FireResult> results;
        for (auto& shard : shards) {
            results.push_back(shard.fire_early(key, index, now));
        }
        early_fired.insert({key, index});
        absorb(join::merge_partials(std::move(results), op), index);
    }

    void absorb(const join::MergeResult& merged, std::uint64_t index)
    {
        auto* book = index >= watermarks_done ? &books[index] : nullptr;
        for (const auto& output : merged.committed) {
            ++counters["outputs"];
            pending.push_back(output);
            if (book != nullptr) {
                book->fired_at.try_emplace(output.key, now);
            }
        }
        for (const auto& incomplete : merged.incomplete) {
            ++counters["incomplete"];
            if (book != nullptr) {
                book->fired_at.try_emplace(incomplete.key, now);
            }
            log.emit(now, "incomplete",
                     {{"key", incomplete.key}, {"window", incomplete.window_index}, {"missing", incomplete.missing_streams}});
            const auto& [d1, d2] = key_devices.at(incomplete.key);
            for (int stream : incomplete.missing_streams) {
                start_probe(stream == 1 ? d1 : d2, "incomplete");
            }
        }
    }

    void emit_verdict(DeviceId device, FrameCounter fc, detection::DropMethod method)
    {
        if (!verdicts.insert({device, fc, static_cast<int>(method)}).second) {
            return;
        }
        ++counters[std::string("verdicts_") + detection::to_string(method)];
        log.emit(now, "verdict", {{"device", device}, {"fc", fc}, {"method", detection::to_string(method)}});
        if (method != detection::DropMethod::LateEvent) {
            start_probe(device, detection::to_string(method));
        }
    }

    // ---- watermark processing ----------------------------------------------

    void on_watermark(std::uint64_t index)
    {
        const auto span = span_of(index);
        for (auto& [device, tracker] : trackers) {
            for (const auto& verdict : tracker.on_watermark(now).verdicts) {
                emit_verdict(verdict.device, verdict.frame_counter, detection::DropMethod::SequenceGap);
            }
        }

        auto& book = books[index];
        std::vector<detection::SequenceVector> secondaries;
        std::set<DeviceId> observed;
        for (const auto& [gateway, vector] : book.vectors) {
            secondaries.push_back(vector);
            for (const auto& [device, _] : vector.seen) {
                observed.insert(device);
            }
        }
        for (auto device : observed) {
            for (const auto& verdict : detection::reconcile_broadcast(book.consumed, secondaries, device, now)) {
                emit_verdict(verdict.device, verdict.frame_counter, detection::DropMethod::BroadcastReconcile);
            }
        }

        std::vector<join::FireResult> results;
        auto mode_of = [this, index](const std::string& key) { return mode_for(key, index); };
        for (auto& shard : shards) {
            auto closed = shard.close_window(index, join::FireReason::Watermark, now, mode_of);
            results.insert(results.end(), closed.begin(), closed.end());
        }
        absorb(join::merge_partials(std::move(results), op), index);

        std::vector<Millis> latencies;
        for (const auto& [_, stat] : book.entries) {
            auto done = stat.done;
            if (!done) {
                auto fired = book.fired_at.find(stat.key);
                done = fired != book.fired_at.end() ? fired->second : now;
            }
            latencies.push_back(*done - stat.event_time);
        }
        const windowing::WindowRecord record{
            span.end - span.start, latencies.size(), late_since_watermark,
            windowing::observed_latency(latencies, config.window.latency_statistic)
                .value_or(config.window.desired_latency_ms)};
        const auto branch = controller.on_recompute_trigger(config.window, record);
        log.emit(now, "window",
                 {{"index", index},
                  {"start", span.start},
                  {"end", span.end},
                  {"size", record.size},
                  {"messages", record.messages},
                  {"late", record.late_entries},
                  {"latency", record.observed_latency},
                  {"branch", windowing::to_string(branch)},
                  {"next_size", controller.current_size()}});
        late_since_watermark = 0;

        for (const auto& [device, frames] : book.snrs) {
            auto& table = adr_tables.at(device);
            for (const auto& [fc, by_gateway] : frames) {
                std::vector<double> snrs;
                for (const auto& [_, snr] : by_gateway) {
                    snrs.push_back(snr);
                }
                table.record_frame(fc, snrs);
            }
            auto& [rate, power] = rate_power.at(device);
            if (auto suggestion = adr::adr_decision(table, rate, power, config.data_rates)) {
                rate += suggestion->raise_data_rate_steps;
                power += suggestion->lower_power_steps;
                log.emit(now, "adr",
                         {{"device", device},
                          {"raise", suggestion->raise_data_rate_steps},
                          {"lower_power", suggestion->lower_power_steps},
                          {"rate_index", rate},
                          {"power_index", power},
                          {"snr_max", *table.max_snr()}});
            }
        }

        books.erase(index);
        watermarks_done = index + 1;
        if ((index + 1) % config.checkpoint_interval_windows == 0) {
            checkpoint(current_offset);
        }
    }

    void on_late_deadline(std::uint64_t index)
    {
        std::vector<join::FireResult> results;
        auto mode_of = [this, index](const std::string& key) { return mode_for(key, index); };
        for (auto& shard : shards) {
            auto closed = shard.close_window(index, join::FireReason::LateDeadline, now, mode_of);
            results.insert(results.end(), closed.begin(), closed.end());
        }
        absorb(join::merge_partials(std::move(results), op), index);
        std::erase_if(early_fired, [index](const auto& cell) { return cell.second == index; });
        late_closed.insert(index);
        while (windows.size() > 1 && late_closed.erase(windows.front().index) > 0) {
            windows.pop_front();
        }
    }

    // ---- probes -------------------------------------------------------------

    void start_probe(DeviceId device, std::string_view reason)
    {
        if (probes.contains(device)) {
            return;
        }
        const auto deadline = windows.back().end + config.watermark_delay_ms;
        const auto& node = info(device);
        probes.emplace(device, recovery::ProbeCycle(node.quorum, now, deadline, issuer));
        class_a_dispatched.erase(device);
        schedule(deadline, TimerKind::ProbeDeadline, 0, device);
        ++counters["probe_cycles"];
        log.emit(now, "probe", {{"device", device}, {"reason", reason}, {"deadline", deadline}});
        if (node.device_class != DeviceClass::A) {
            dispatch(device, SIZE_MAX);
        }
    }

    void maybe_dispatch_class_a(DeviceId device, FrameCounter fc)
    {
        if (!probes.contains(device) || info(device).device_class != DeviceClass::A) {
            return;
        }
        auto it = class_a_dispatched.find(device);
        if (it != class_a_dispatched.end() && it->second >= fc) {
            return;
        }
        class_a_dispatched[device] = fc;
        dispatch(device, 2);
    }

    void dispatch(DeviceId device, std::size_t limit)
    {
        auto& cycle = probes.at(device);
        const auto legs = cycle.unsent_legs();
        for (std::size_t i = 0; i < legs.size() && i < limit; ++i) {
            cycle.mark_sent(legs[i].correlation_id, now);
            ++counters["probe_legs"];
            if (!replaying && command_handler) {
                command_handler(ProbeCommand{device, legs[i].gateway, legs[i].correlation_id});
            }
        }
    }

    void on_echo(const ProbeEchoInput& echo)
    {
        auto it = probes.find(echo.device);
        if (it == probes.end()) {
            ++counters["probe_echo_after_cycle"];
            return;
        }
        const auto outcome = it->second.correlate_response(echo.correlation_id, echo.gateway, now);
        ++counters[std::string("probe_echo_") + recovery::to_string(outcome)];
    }

    void on_probe_deadline(DeviceId device)
    {
        auto it = probes.find(device);
        if (it == probes.end()) {
            return;
        }
        const auto outcome = it->second.finish(now);
        probes.erase(it);
        class_a_dispatched.erase(device);
        if (const auto* election = std::get_if<recovery::ElectionResult>(&outcome)) {
            const auto previous = primary_at(device, now + 1);
            elections[device].emplace_back(election->decided_at, election->primary_gateway);
            json counts = json::object();
            for (const auto& [gw, n] : election->relayed_counts) {
                counts[std::to_string(gw)] = n;
            }
            log.emit(now, "election",
                     {{"device", device},
                      {"primary", election->primary_gateway},
                      {"previous", previous},
                      {"decided_at", election->decided_at},
                      {"counts", counts}});
        }
        else {
            log.emit(now, "no_quorum", {{"device", device}});
        }
    }

    // ---- checkpoints --------------------------------------------------------

    json engine_json() const
    {
        std::vector<std::pair<DeviceId, recovery::ProbeCycle::State>> probe_states;
        for (const auto& [device, cycle] : probes) {
            probe_states.emplace_back(device, cycle.state());
        }
        std::vector<detection::SequenceTracker::State> tracker_states;
        for (const auto& [_, tracker] : trackers) {
            tracker_states.push_back(tracker.state());
        }
        std::map<DeviceId, std::vector<adr::AdrRecord>> adr_records;
        for (const auto& [device, table] : adr_tables) {
            adr_records[device] = table.records();
        }
        std::vector<Timer> timer_list(timers.begin(), timers.end());
        return {{"now", now},
                {"timers", timer_list},
                {"timer_seq", timer_seq},
                {"windows", windows},
                {"late_closed", late_closed},
                {"watermarks_done", watermarks_done},
                {"books", books},
                {"late_since_watermark", late_since_watermark},
                {"controller",
                 {{"current", controller.current_size()},
                  {"last_known_good", controller.last_known_good()},
                  {"history", std::vector<windowing::WindowRecord>(controller.history().begin(),
                                                                   controller.history().end())}}},
                {"trackers", tracker_states},
                {"adr", adr_records},
                {"rate_power", rate_power},
                {"elections", elections},
                {"probes", probe_states},
                {"class_a_dispatched", class_a_dispatched},
                {"issuer_next", issuer.peek()},
                {"early_fired", early_fired},
                {"verdicts", verdicts},
                {"checkpoint_attempts", checkpoint_attempts},
                {"counters", counters}};
    }

    void load_engine_json(const json& j)
    {
        j.at("now").get_to(now);
        timers.clear();
        for (const auto& t : j.at("timers").get<std::vector<Timer>>()) {
            timers.insert(t);
        }
        j.at("timer_seq").get_to(timer_seq);
        j.at("windows").get_to(windows);
        j.at("late_closed").get_to(late_closed);
        j.at("watermarks_done").get_to(watermarks_done);
        j.at("books").get_to(books);
        j.at("late_since_watermark").get_to(late_since_watermark);
        const auto& c = j.at("controller");
        const auto history = c.at("history").get<std::vector<windowing::WindowRecord>>();
        controller = windowing::WindowController::restore(
            config.base_composite_window, c.at("current").get<Millis>(),
            c.at("last_known_good").get<std::optional<Millis>>(),
            std::deque<windowing::WindowRecord>(history.begin(), history.end()));
        trackers.clear();
        for (const auto& s : j.at("trackers").get<std::vector<detection::SequenceTracker::State>>()) {
            trackers.emplace(s.device, detection::SequenceTracker::from_state(s));
        }
        adr_tables.clear();
        for (const auto& [device, records] :
             j.at("adr").get<std::map<DeviceId, std::vector<adr::AdrRecord>>>()) {
            adr_tables.emplace(device, adr::AdrTable::restore(device, records));
        }
        j.at("rate_power").get_to(rate_power);
        j.at("elections").get_to(elections);
        probes.clear();
        for (auto& [device, s] :
             j.at("probes").get<std::vector<std::pair<DeviceId, recovery::ProbeCycle::State>>>()) {
            probes.emplace(device, recovery::ProbeCycle::from_state(std::move(s)));
        }
        j.at("class_a_dispatched").get_to(class_a_dispatched);
        issuer = recovery::CorrelationIdIssuer(j.at("issuer_next").get<recovery::CorrelationId>());
        j.at("early_fired").get_to(early_fired);
        j.at("verdicts").get_to(verdicts);
        j.at("checkpoint_attempts").get_to(checkpoint_attempts);
        j.at("counters").get_to(counters);
    }

    std::vector<join::Shard::State> shard_states() const
    {
        std::vector<join::Shard::State> out;
        for (const auto& shard : shards) {
            out.push_back(shard.state());
        }
        return out;
    }

    void checkpoint(std::size_t journal_offset)
    {
        ++checkpoint_attempts;
        const auto epoch = op.epoch() + 1;
        if (replaying) {
            return;
        }
        if (config.checkpoint_failures.contains(checkpoint_attempts)) {
            log.emit(now, "checkpoint", {{"epoch", epoch}, {"ok", false}, {"reason", "injected failure"}});
            return;
        }

        // Marker pass: each shard records its state on the first marker and
        // captures whatever is still queued on its channels behind it.
        std::vector<join::Shard::State> recorded(shards.size());
        std::vector<std::vector<std::vector<join::StreamEntry>>> in_flight(shards.size());
        for (std::size_t i = 0; i < shards.size(); ++i) {
            state::MarkerRecorder<join::StreamEntry> recorder(channels[i].size());
            for (auto& channel : channels[i]) {
                channel.push_marker(state::Marker{epoch, now});
            }
            for (std::size_t c = 0; c < channels[i].size(); ++c) {
                while (!channels[i][c].empty()) {
                    auto element = channels[i][c].pop();
                    if (const auto* marker = std::get_if<state::Marker>(&element)) {
                        if (recorder.on_marker(c, *marker)) {
                            recorded[i] = shards[i].state();
                        }
                    }
                    else {
                        recorder.on_item(c, std::get<join::StreamEntry>(element));
                    }
                }
            }
            if (!recorder.complete()) {
                throw InternalBreach("checkpoint marker did not reach every channel");
            }
            for (std::size_t c = 0; c < channels[i].size(); ++c) {
                in_flight[i].push_back(recorder.channel_state(c));
            }
        }

        op.set_epoch(epoch);
        state::Snapshot snapshot;
        snapshot.epoch = epoch;
        snapshot.sections.emplace_back(
            "meta", to_bytes({{"epoch", epoch}, {"journal_offset", journal_offset}, {"at", now}}));
        snapshot.sections.emplace_back("engine", to_bytes(engine_json()));
        snapshot.sections.emplace_back("operator", op.serialize());
        snapshot.sections.emplace_back("shards", to_bytes(json(recorded)));
        snapshot.sections.emplace_back("channels", to_bytes(json(in_flight)));
        try {
            state::EpochLedger(store, epoch - 1).checkpoint(snapshot);
        }
        catch (const state::PersistenceError& e) {
            op.set_epoch(epoch - 1);
            log.emit(now, "checkpoint", {{"epoch", epoch}, {"ok", false}, {"reason", e.what()}});
            return;
        }
        for (const auto& output : pending) {
            sink.publish(output);
            log.emit(now, "commit", output_json(output));
        }
        log.emit(now, "checkpoint",
                 {{"epoch", epoch}, {"ok", true}, {"journal_offset", journal_offset}, {"published", pending.size()}});
        pending.clear();
    }

    std::uint64_t restore_latest()
    {
        const bool was_muted = log.muted();
        log.set_muted(true);
        reset();
        start();
        log.set_muted(was_muted);
        snapshot_offset = 0;

        const auto latest = store.latest_epoch();
        if (!latest) {
            return 0;
        }
        const auto snapshot = std::optional<state::Snapshot>(state::EpochLedger(store).restore(*latest));
        const auto meta = from_bytes(*snapshot, "meta");
        load_engine_json(from_bytes(*snapshot, "engine"));
        const auto* op_bytes = snapshot->section("operator");
        if (op_bytes == nullptr) {
            throw state::CorruptSnapshot("snapshot lacks section 'operator'");
        }
        op = state::OperatorState::deserialize(*op_bytes);
        shards.clear();
        for (auto& s : from_bytes(*snapshot, "shards").get<std::vector<join::Shard::State>>()) {
            shards.push_back(join::Shard::from_state(std::move(s)));
        }
        if (shards.size() != config.shards.size()) {
            throw state::CorruptSnapshot("snapshot shard count does not match the configuration");
        }
        snapshot_offset = meta.at("journal_offset").get<std::size_t>();
        pending.clear();

        const auto in_flight =
            from_bytes(*snapshot, "channels").get<std::vector<std::vector<std::vector<join::StreamEntry>>>>();
        for (std::size_t i = 0; i < in_flight.size() && i < shards.size(); ++i) {
            for (const auto& items : in_flight[i]) {
                for (const auto& item : items) {
                    route(item, i);
                }
            }
        }
        return op.epoch();
    }

    std::size_t replay()
    {
        const bool was_muted = log.muted();
        log.set_muted(true);
        replaying = true;
        std::size_t replayed = 0;
        for (std::size_t offset = snapshot_offset; offset < journal.size(); ++offset) {
            consume(offset);
            ++replayed;
        }
        replaying = false;
        log.set_muted(was_muted);
        return replayed;
    }

    void start()
    {
        open_window(0, VirtualTime{});
    }
};

Orchestrator::Orchestrator(EngineConfig config, state::SnapshotStore& store, const Journal& journal, EventLog& log,
                           OutputSink& sink)
    : impl_(std::make_unique<Impl>(std::move(config), store, journal, log, sink))
{
}

Orchestrator::~Orchestrator() = default;

void Orchestrator::start()
{
    impl_->reset();
    impl_->start();
}

void Orchestrator::consume(std::size_t offset)
{
    impl_->consume(offset);
}

std::optional<VirtualTime> Orchestrator::next_deadline() const
{
    if (impl_->timers.empty()) {
        return std::nullopt;
    }
    return impl_->timers.begin()->deadline;
}

void Orchestrator::finish(VirtualTime end)
{
    impl_->advance(end);
    impl_->checkpoint(impl_->journal.size());
    impl_->log.emit(end, "run_end", {{"epoch", impl_->op.epoch()}, {"unpublished", impl_->pending.size()}});
}

void Orchestrator::set_command_handler(std::function<void(const ProbeCommand&)> handler)
{
    impl_->command_handler = std::move(handler);
}

std::uint64_t Orchestrator::restore_latest_snapshot()
{
    return impl_->restore_latest();
}

std::size_t Orchestrator::replay_journal_since_snapshot()
{
    return impl_->replay();
}

const state::OperatorState& Orchestrator::operator_state() const
{
    return impl_->op;
}

GatewayId Orchestrator::primary_at(DeviceId device, VirtualTime t) const
{
    return impl_->primary_at(device, t);
}

Millis Orchestrator::current_window_size() const
{
    return impl_->controller.current_size();
}

std::uint64_t Orchestrator::epoch() const
{
    return impl_->op.epoch();
}

std::size_t Orchestrator::pending_outputs() const
{
    return impl_->pending.size();
}

std::vector<std::uint8_t> Orchestrator::state_fingerprint() const
{
    return json::to_cbor(json{{"engine", impl_->engine_json()},
                              {"operator", json::from_cbor(impl_->op.serialize())},
                              {"shards", impl_->shard_states()}});
}

}  // namespace lorastream
