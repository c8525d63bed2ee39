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

#include "lorastream/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lorastream::windowing {

void WindowParams::validate() const
{
    if (!(window_factor > 0.0 && window_factor < 1.0)) {
        throw std::invalid_argument("window_factor must lie strictly between 0 and 1");
    }
    if (history_len < 1) {
        throw std::invalid_argument("history_len must be at least 1");
    }
    if (desired_latency_ms < 0) {
        throw std::invalid_argument("desired_latency must be non-negative");
    }
    if (min_size_ms < 1) {
        throw std::invalid_argument("min_size must be at least 1 ms");
    }
}

std::int64_t round_half_up(std::int64_t numerator, std::int64_t denominator)
{
    return (numerator + denominator / 2) / denominator;
}

std::optional<Millis> observed_latency(std::span<const Millis> per_message, LatencyStatistic statistic)
{
    if (per_message.empty()) {
        return std::nullopt;
    }
    const auto n = static_cast<std::int64_t>(per_message.size());
    if (statistic == LatencyStatistic::Mean) {
        const auto sum = std::accumulate(per_message.begin(), per_message.end(), std::int64_t{0});
        return round_half_up(sum, n);
    }
    std::vector<Millis> sorted(per_message.begin(), per_message.end());
    std::sort(sorted.begin(), sorted.end());
    const auto rank = (95 * n + 99) / 100;
    return sorted[static_cast<std::size_t>(rank - 1)];
}

Millis transmission_time_ms(std::int64_t message_size, std::int64_t data_rate)
{
    if (message_size <= 0 || data_rate <= 0) {
        throw std::invalid_argument("message size and data rate must be positive");
    }
    return (1000 * message_size + data_rate - 1) / data_rate;
}

Millis initial_window(std::int64_t m1, std::int64_t s1, std::int64_t m2, std::int64_t s2)
{
    return std::lcm(transmission_time_ms(m1, s1), transmission_time_ms(m2, s2));
}

std::optional<Millis> moving_average(std::span<const WindowRecord> history, std::uint64_t late_threshold)
{
    std::int64_t weighted = 0;
    std::int64_t weight = 0;
    for (const auto& record : history) {
        if (record.late_entries > late_threshold) {
            continue;
        }
        const auto m = static_cast<std::int64_t>(record.messages);
        weighted += m * record.size;
        weight += m;
    }
    if (weight == 0) {
        return std::nullopt;
    }
    return round_half_up(weighted, weight);
}

const char* to_string(RecomputeBranch branch)
{
    switch (branch) {
    case RecomputeBranch::Shrunk: return "shrunk";
    case RecomputeBranch::Reverted: return "reverted";
    case RecomputeBranch::Unchanged: return "unchanged";
    }
    return "?";
}

WindowController::WindowController(Millis base_composite_window)
    : bcw_(base_composite_window), current_size_(base_composite_window)
{
    if (base_composite_window <= 0) {
        throw std::invalid_argument("base composite window must be positive");
    }
}

WindowController WindowController::restore(Millis bcw, Millis current, std::optional<Millis> last_known_good,
                                           std::deque<WindowRecord> history)
{
    WindowController controller(bcw);
    if (current <= 0) {
        throw std::invalid_argument("restored window size must be positive");
    }
    controller.current_size_ = current;
    controller.last_known_good_ = last_known_good;
    controller.history_ = std::move(history);
    return controller;
}

RecomputeBranch WindowController::on_recompute_trigger(const WindowParams& params, const WindowRecord& latest)
{
    history_.push_back(latest);
    while (history_.size() > params.history_len) {
        history_.pop_front();
    }

    if (latest.observed_latency < params.desired_latency_ms) {
        last_known_good_ = current_size_;
        const auto shrunk = static_cast<Millis>(std::floor(static_cast<double>(current_size_) * params.window_factor + 0.5));
        current_size_ = std::max<Millis>(params.min_size_ms, shrunk);
        return RecomputeBranch::Shrunk;
    }

    if (latest.late_entries > params.late_threshold) {
        const std::vector<WindowRecord> records(history_.begin(), history_.end());
        const auto average = moving_average(records, params.late_threshold);
        std::optional<Millis> target;
        if (params.fallback == FallbackOrder::LastKnownGoodFirst) {
            target = last_known_good_ ? last_known_good_ : average;
        }
        else {
            target = average ? average : last_known_good_;
        }
        current_size_ = std::max<Millis>(params.min_size_ms, std::min<Millis>(target.value_or(bcw_), bcw_));
        return RecomputeBranch::Reverted;
    }

    return RecomputeBranch::Unchanged;
}

}  // namespace lorastream::windowing
