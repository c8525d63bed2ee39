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

#include "lorastream/sim_core.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>

namespace lorastream::windowing {

enum class FallbackOrder : std::uint8_t { LastKnownGoodFirst, MovingAverageFirst };

/// How a window's per-message latencies are summarized.
enum class LatencyStatistic : std::uint8_t { Mean, P95 };

struct WindowParams {
    Millis desired_latency_ms = 500;    // DL
    double window_factor = 0.5;         // WF, shrink multiplier in (0,1)
    std::uint64_t late_threshold = 5;   // LT
    std::size_t history_len = 20;       // H
    FallbackOrder fallback = FallbackOrder::LastKnownGoodFirst;
    Millis min_size_ms = 1;             // shrinking never goes below this
    LatencyStatistic latency_statistic = LatencyStatistic::Mean;

    void validate() const;
};

/// Statistics of one closed window.
struct WindowRecord {
    Millis size = 1;
    std::uint64_t messages = 0;
    std::uint64_t late_entries = 0;
    Millis observed_latency = 0;

    bool operator==(const WindowRecord&) const = default;
};

/// Rounds a non-negative ratio half-up to the nearest integer.
std::int64_t round_half_up(std::int64_t numerator, std::int64_t denominator);

/// ceil(1000 * message_size / data_rate): time on air of one message, in ms.
Millis transmission_time_ms(std::int64_t message_size, std::int64_t data_rate);

/// Mean (rounded half up) or nearest-rank p95 of per-message latencies.
/// nullopt for an empty window.
std::optional<Millis> observed_latency(std::span<const Millis> per_message, LatencyStatistic statistic);

/// Base composite window: the LCM of both devices' per-message transmission
/// times. Throws std::invalid_argument on non-positive input.
Millis initial_window(std::int64_t m1, std::int64_t s1, std::int64_t m2, std::int64_t s2);

/// Message-weighted mean of window sizes. Windows that breached the late
/// threshold carry zero weight. nullopt when no weight remains.
std::optional<Millis> moving_average(std::span<const WindowRecord> history, std::uint64_t late_threshold);

enum class RecomputeBranch : std::uint8_t { Shrunk, Reverted, Unchanged };

const char* to_string(RecomputeBranch branch);

class WindowController {
public:
    explicit WindowController(Millis base_composite_window);

    Millis current_size() const { return current_size_; }
    Millis base_composite_window() const { return bcw_; }
    std::optional<Millis> last_known_good() const { return last_known_good_; }
    const std::deque<WindowRecord>& history() const { return history_; }

    /// Appends the closed window's record, then shrinks when latency is under
    /// target or reverts when the late threshold is breached.
    RecomputeBranch on_recompute_trigger(const WindowParams& params, const WindowRecord& latest);

    /// Rebuilds a controller from persisted fields.
    static WindowController restore(Millis bcw, Millis current, std::optional<Millis> last_known_good,
                                    std::deque<WindowRecord> history);

private:
    Millis bcw_;
    Millis current_size_;
    std::optional<Millis> last_known_good_;
    std::deque<WindowRecord> history_;
};

}  // namespace lorastream::windowing
