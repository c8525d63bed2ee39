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

#include "lorastream/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace lorastream {

using nlohmann::json;

namespace {

using FrameKey = std::pair<std::uint32_t, std::uint32_t>;  // device, frame counter

struct Delivery {
    std::uint32_t gateway = 0;
    std::int64_t arrival = 0;
};

struct Frame {
    std::int64_t sent_at = 0;
    std::vector<Delivery> deliveries;  // originals and duplicate forwards
};

Distribution distribution(std::vector<double> values)
{
    Distribution d;
    if (values.empty()) {
        return d;
    }
    std::sort(values.begin(), values.end());
    d.count = values.size();
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    d.mean = sum / static_cast<double>(values.size());
    auto rank = [&values](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()))) - 1;
        return values[std::min(idx, values.size() - 1)];
    };
    d.p50 = rank(0.50);
    d.p95 = rank(0.95);
    d.max = values.back();
    return d;
}

void finalize(MethodScore& score)
{
    if (score.verdicts > 0) {
        score.precision = static_cast<double>(score.true_positives) / static_cast<double>(score.verdicts);
    }
    if (score.eligible > 0) {
        score.recall = static_cast<double>(score.detected) / static_cast<double>(score.eligible);
    }
}

json optional_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

json distribution_json(const Distribution& d)
{
    return {{"count", d.count}, {"mean", d.mean}, {"p50", d.p50}, {"p95", d.p95}, {"max", d.max}};
}

}  // namespace

RunReport build_report(const std::vector<json>& events)
{
    RunReport report;
    std::map<std::uint32_t, std::uint32_t> initial_primary;
    std::map<std::uint32_t, std::vector<std::pair<std::int64_t, std::uint32_t>>> history;
    std::map<FrameKey, Frame> frames;
    std::map<std::uint64_t, std::pair<std::int64_t, std::int64_t>> spans;  // index -> (start, end)
    std::map<std::uint64_t, std::int64_t> watermark_at;
    std::map<std::string, std::set<FrameKey>> verdicts;
    std::int64_t last_watermark = -1;

    for (const auto& e : events) {
        const auto type = e.at("ev").get<std::string>();
        const auto t = e.at("t").get<std::int64_t>();
        if (type == "config") {
            report.seed = e.at("seed").get<std::uint64_t>();
            report.duration_ms = e.at("duration_ms").get<std::int64_t>();
        }
        else if (type == "device") {
            initial_primary[e.at("id").get<std::uint32_t>()] = e.at("quorum").at(0).get<std::uint32_t>();
        }
        else if (type == "tx") {
            ++report.transmissions;
            Frame frame;
            frame.sent_at = t;
            for (const auto& r : e.at("receptions")) {
                frame.deliveries.push_back({r.at(0).get<std::uint32_t>(), r.at(2).get<std::int64_t>()});
                ++report.receptions;
            }
            frames[{e.at("device").get<std::uint32_t>(), e.at("fc").get<std::uint32_t>()}] = std::move(frame);
        }
        else if (type == "dup") {
            auto it = frames.find({e.at("device").get<std::uint32_t>(), e.at("fc").get<std::uint32_t>()});
            if (it != frames.end()) {
                it->second.deliveries.push_back(
                    {e.at("gateway").get<std::uint32_t>(), e.at("arrival").get<std::int64_t>()});
            }
        }
        else if (type == "window_open") {
            spans[e.at("index").get<std::uint64_t>()] = {e.at("start").get<std::int64_t>(),
                                                         e.at("end").get<std::int64_t>()};
        }
        else if (type == "window") {
            WindowTraceRow row;
            row.index = e.at("index").get<std::uint64_t>();
            row.start = e.at("start").get<std::int64_t>();
            row.end = e.at("end").get<std::int64_t>();
            row.size = e.at("size").get<std::int64_t>();
            row.messages = e.at("messages").get<std::uint64_t>();
            row.late = e.at("late").get<std::uint64_t>();
            row.latency = e.at("latency").get<std::int64_t>();
            row.branch = e.at("branch").get<std::string>();
            row.next_size = e.at("next_size").get<std::int64_t>();
            row.watermark_at = t;
            watermark_at[row.index] = t;
            last_watermark = std::max(last_watermark, t);
            report.windows.push_back(std::move(row));
        }
        else if (type == "verdict") {
            verdicts[e.at("method").get<std::string>()].insert(
                {e.at("device").get<std::uint32_t>(), e.at("fc").get<std::uint32_t>()});
        }
        else if (type == "election") {
            const auto device = e.at("device").get<std::uint32_t>();
            const auto primary = e.at("primary").get<std::uint32_t>();
            history[device].emplace_back(e.at("decided_at").get<std::int64_t>(), primary);
            report.elections.push_back({t, device, primary, e.at("previous").get<std::uint32_t>()});
        }
        else if (type == "no_quorum") {
            ++report.no_quorum;
        }
        else if (type == "probe") {
            ++report.probe_cycles;
        }
        else if (type == "incomplete") {
            ++report.incomplete_windows;
        }
        else if (type == "adr") {
            ++report.adr_commands;
        }
        else if (type == "commit") {
            ++report.committed_outputs;
        }
        else if (type == "checkpoint") {
            if (e.at("ok").get<bool>()) {
                report.snapshot_epochs.push_back(e.at("epoch").get<std::uint64_t>());
            }
            else {
                ++report.failed_checkpoints;
            }
        }
        else if (type == "failover") {
            ++report.failovers;
        }
        else if (type == "run_end") {
            report.unpublished_outputs = e.at("unpublished").get<std::uint64_t>();
        }
    }

    auto primary_at = [&](std::uint32_t device, std::int64_t t) {
        auto primary = initial_primary.at(device);
        if (auto it = history.find(device); it != history.end()) {
            for (const auto& [decided_at, gateway] : it->second) {
                if (decided_at < t) {
                    primary = gateway;
                }
            }
        }
        return primary;
    };
    std::map<std::int64_t, std::uint64_t> by_start;
    for (const auto& [index, span] : spans) {
        by_start[span.first] = index;
    }
    auto window_of = [&](std::int64_t t) -> std::optional<std::uint64_t> {
        auto it = by_start.upper_bound(t);
        if (it == by_start.begin()) {
            return std::nullopt;
        }
        --it;
        if (t >= spans.at(it->second).second) {
            return std::nullopt;
        }
        return it->second;
    };

    // Ground truth per frame.
    std::set<FrameKey> dropped;
    std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, std::int64_t>>> primary_arrivals;
    std::set<FrameKey> late_deliveries;
    for (const auto& [key, frame] : frames) {
        const auto primary = primary_at(key.first, frame.sent_at);
        std::optional<std::int64_t> first_primary;
        for (const auto& d : frame.deliveries) {
            if (d.gateway == primary && (!first_primary || d.arrival < *first_primary)) {
                first_primary = d.arrival;
            }
        }
        if (!first_primary) {
            dropped.insert(key);
            continue;
        }
        if (report.duration_ms == 0 || *first_primary <= report.duration_ms) {
            primary_arrivals[key.first].emplace_back(key.second, *first_primary);
        }
        const auto window = window_of(frame.sent_at);
        if (window) {
            auto wm = watermark_at.find(*window);
            if (wm != watermark_at.end()) {
                for (const auto& d : frame.deliveries) {
                    if (d.gateway == primary && d.arrival > wm->second &&
                        (report.duration_ms == 0 || d.arrival <= report.duration_ms)) {
                        late_deliveries.insert(key);
                    }
                }
            }
        }
    }
    report.primary_path_drops = dropped.size();

    auto score = [&](const std::string& method, const std::set<FrameKey>& truth, const std::set<FrameKey>& eligible) {
        MethodScore s;
        const auto& found = verdicts[method];
        s.verdicts = found.size();
        for (const auto& v : found) {
            if (truth.contains(v)) {
                ++s.true_positives;
            }
        }
        s.eligible = eligible.size();
        for (const auto& v : eligible) {
            if (found.contains(v)) {
                ++s.detected;
            }
        }
        finalize(s);
        report.detection[method] = s;
    };

    // A sequence gap is observable once a later frame of the same device
    // reached the orchestrator through its primary and a watermark followed.
    std::set<FrameKey> gap_eligible;
    for (const auto& key : dropped) {
        auto it = primary_arrivals.find(key.first);
        if (it == primary_arrivals.end()) {
            continue;
        }
        std::optional<std::int64_t> detection;
        for (const auto& [fc, arrival] : it->second) {
            if (fc > key.second && (!detection || arrival < *detection)) {
                detection = arrival;
            }
        }
        if (detection && *detection <= last_watermark) {
            gap_eligible.insert(key);
        }
    }
    score("sequence-gap", dropped, gap_eligible);

    // A broadcast reconcile can only find frames some other gateway forwarded
    // before the window's watermark.
    std::set<FrameKey> reconcile_eligible;
    for (const auto& key : dropped) {
        const auto& frame = frames.at(key);
        const auto window = window_of(frame.sent_at);
        if (!window) {
            continue;
        }
        auto wm = watermark_at.find(*window);
        if (wm == watermark_at.end()) {
            continue;
        }
        for (const auto& d : frame.deliveries) {
            if (d.arrival <= wm->second) {
                reconcile_eligible.insert(key);
                break;
            }
        }
    }
    score("broadcast-reconcile", dropped, reconcile_eligible);
    score("late-event", late_deliveries, late_deliveries);

    std::vector<double> latencies;
    for (const auto& row : report.windows) {
        latencies.push_back(static_cast<double>(row.latency));
    }
    report.window_latency_ms = distribution(std::move(latencies));

    std::vector<double> delays;
    for (const auto& e : events) {
        if (e.at("ev") == "commit") {
            const auto newest =
                std::max(e.at("event_time1").get<std::int64_t>(), e.at("event_time2").get<std::int64_t>());
            delays.push_back(static_cast<double>(e.at("produced_at").get<std::int64_t>() - newest));
        }
    }
    report.output_delay_ms = distribution(std::move(delays));
    return report;
}

json RunReport::to_json() const
{
    json detection_json = json::object();
    for (const auto& [method, s] : detection) {
        detection_json[method] = {{"verdicts", s.verdicts},
                                  {"true_positives", s.true_positives},
                                  {"eligible", s.eligible},
                                  {"detected", s.detected},
                                  {"precision", optional_json(s.precision)},
                                  {"recall", optional_json(s.recall)}};
    }
    json windows_json = json::array();
    for (const auto& w : windows) {
        windows_json.push_back({{"index", w.index},
                                {"start", w.start},
                                {"end", w.end},
                                {"size", w.size},
                                {"messages", w.messages},
                                {"late", w.late},
                                {"latency", w.latency},
                                {"branch", w.branch},
                                {"next_size", w.next_size}});
    }
    json elections_json = json::array();
    for (const auto& e : elections) {
        elections_json.push_back({{"at", e.at}, {"device", e.device}, {"primary", e.primary}, {"previous", e.previous}});
    }
    return {{"seed", seed},
            {"duration_ms", duration_ms},
            {"transmissions", transmissions},
            {"receptions", receptions},
            {"primary_path_drops", primary_path_drops},
            {"committed_outputs", committed_outputs},
            {"unpublished_outputs", unpublished_outputs},
            {"incomplete_windows", incomplete_windows},
            {"probe_cycles", probe_cycles},
            {"no_quorum", no_quorum},
            {"adr_commands", adr_commands},
            {"detection", detection_json},
            {"window_latency_ms", distribution_json(window_latency_ms)},
            {"output_delay_ms", distribution_json(output_delay_ms)},
            {"windows", windows_json},
            {"elections", elections_json},
            {"snapshot_epochs", snapshot_epochs},
            {"failed_checkpoints", failed_checkpoints},
            {"failovers", failovers}};
}

std::string window_trace_csv(const RunReport& report)
{
    std::ostringstream out;
    out << "index,start_ms,end_ms,size_ms,messages,late_entries,observed_latency_ms,branch,next_size_ms\n";
    for (const auto& w : report.windows) {
        out << w.index << ',' << w.start << ',' << w.end << ',' << w.size << ',' << w.messages << ',' << w.late
            << ',' << w.latency << ',' << w.branch << ',' << w.next_size << '\n';
    }
    return out.str();
}

}  // namespace lorastream
