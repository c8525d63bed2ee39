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

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lorastream {

/// Detection quality of one drop-detection method against ground truth
/// reconstructed from the event log. Ratios are absent when undefined.
struct MethodScore {
    std::uint64_t verdicts = 0;
    std::uint64_t true_positives = 0;
    std::uint64_t eligible = 0;
    std::uint64_t detected = 0;
    std::optional<double> precision;
    std::optional<double> recall;
};

struct WindowTraceRow {
    std::uint64_t index = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t size = 0;
    std::uint64_t messages = 0;
    std::uint64_t late = 0;
    std::int64_t latency = 0;
    std::string branch;
    std::int64_t next_size = 0;
    std::int64_t watermark_at = 0;
};

struct ElectionRow {
    std::int64_t at = 0;
    std::uint32_t device = 0;
    std::uint32_t primary = 0;
    std::uint32_t previous = 0;
};

struct Distribution {
    std::uint64_t count = 0;
    double mean = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

struct RunReport {
    std::uint64_t seed = 0;
    std::int64_t duration_ms = 0;
    std::uint64_t transmissions = 0;
    std::uint64_t receptions = 0;
    std::uint64_t primary_path_drops = 0;
    std::uint64_t committed_outputs = 0;
    std::uint64_t incomplete_windows = 0;
    std::uint64_t probe_cycles = 0;
    std::uint64_t no_quorum = 0;
    std::uint64_t adr_commands = 0;
    std::map<std::string, MethodScore> detection;
    Distribution window_latency_ms;
    Distribution output_delay_ms;
    std::vector<WindowTraceRow> windows;
    std::vector<ElectionRow> elections;
    std::vector<std::uint64_t> snapshot_epochs;
    std::uint64_t failed_checkpoints = 0;
    std::uint64_t failovers = 0;
    std::uint64_t unpublished_outputs = 0;

    nlohmann::json to_json() const;
};

/// A pure function of the event log: the same lines give the same report,
/// whether they come from a live run or from a file.
RunReport build_report(const std::vector<nlohmann::json>& events);

std::string window_trace_csv(const RunReport& report);

}  // namespace lorastream
