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


// Offline reconstructions computed from an event log alone: the joins a
// correct engine must commit and the drops a correct detector must flag.

#pragma once

#include <json.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Arrival {
    std::uint32_t gateway = 0;
    std::int64_t at = 0;
    std::size_t order = 0;  // scheduling order among deliveries at the same time
};

struct Tx {
    std::uint32_t device = 0;
    std::uint32_t fc = 0;
    std::string key;
    int stream = 1;
    std::int64_t value = 0;
    std::int64_t sent_at = 0;
    std::vector<Arrival> arrivals;  // first forwards, then duplicates
    std::set<std::uint32_t> receivers;
};

struct Device {
    double x = 0.0;
    double y = 0.0;
    int stream = 1;
    std::string key;
    std::vector<std::uint32_t> quorum;
};

struct Span {
    std::uint64_t index = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
};

struct Verdict {
    std::uint32_t device = 0;
    std::uint32_t fc = 0;
    std::string method;
    std::int64_t at = 0;
};

struct JoinRow {
    std::string key;
    std::uint64_t window = 0;
    std::uint32_t device1 = 0;
    std::uint32_t fc1 = 0;
    std::uint32_t device2 = 0;
    std::uint32_t fc2 = 0;
    std::int64_t value1 = 0;
    std::int64_t value2 = 0;

    auto operator<=>(const JoinRow&) const = default;
};

struct Election {
    std::int64_t decided_at = 0;
    std::uint32_t primary = 0;
    std::map<std::uint32_t, std::uint32_t> counts;
};

class LogView {
public:
    explicit LogView(const std::vector<nlohmann::json>& events);

    std::uint32_t primary_at(std::uint32_t device, std::int64_t t) const;
    const Span* window_of(std::int64_t t) const;

    std::int64_t duration = 0;
    std::int64_t watermark_delay = 0;
    double threshold = 0.0;
    std::map<std::uint32_t, std::pair<double, double>> gateways;
    std::map<std::uint32_t, Device> devices;
    std::vector<Span> windows;                          // by index
    std::map<std::uint64_t, std::int64_t> watermark_at;  // window index -> time its watermark ran
    std::map<std::uint32_t, std::vector<Election>> elections;
    std::vector<Tx> txs;
    std::vector<Verdict> verdicts;
    std::vector<JoinRow> commits;
    std::uint64_t no_quorum = 0;
};

/// Latest value per stream per key per window over the delivered-message log,
/// following the firing rules: early cells fire the moment both streams are
/// present, others at their closing time if it falls inside the run.
std::vector<JoinRow> join_oracle(const LogView& log);

struct GroundTruth {
    std::set<std::pair<std::uint32_t, std::uint32_t>> drops;  // never reached the primary
    std::set<std::pair<std::uint32_t, std::uint32_t>> gap_eligible;
    std::set<std::pair<std::uint32_t, std::uint32_t>> reconcile_eligible;
    std::set<std::pair<std::uint32_t, std::uint32_t>> secondary_received;
};

GroundTruth ground_truth(const LogView& log);

}  // namespace oracle
