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

#include "lorastream/event_log.hpp"
#include "lorastream/orchestrator.hpp"
#include "lorastream/recovery.hpp"
#include "lorastream/report.hpp"
#include "lorastream/scenario.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace lorastream {

struct RunOptions {
    /// Overrides the scenario's seed.
    std::optional<std::uint64_t> seed;
    /// Where events.jsonl, report.json, outputs.jsonl and snapshots/ go.
    /// Without it snapshots live in memory and nothing is written.
    std::optional<std::filesystem::path> out_dir;
};

struct RunResult {
    std::uint64_t seed = 0;
    EventLog log;
    OutputSink sink;
    RunReport report;
    std::uint64_t final_epoch = 0;
    std::size_t journal_entries = 0;
    std::vector<recovery::PromotionResult> promotions;
};

/// Simulates the scenario end to end: devices transmit over the lossy
/// network, gateways forward to the orchestrator, faults fire on schedule.
/// Throws InternalBreach when the engine's own consistency checks fail.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace lorastream
