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

#include "lorastream/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lorastream {

const char* to_string(EventKind kind)
{
    switch (kind) {
    case EventKind::Transmit: return "transmit";
    case EventKind::ReceiveWindowOpen: return "receive-window-open";
    case EventKind::Delivery: return "delivery";
    case EventKind::Watermark: return "watermark";
    case EventKind::WindowTrigger: return "window-trigger";
    case EventKind::Probe: return "probe";
    case EventKind::CheckpointMarker: return "checkpoint-marker";
    case EventKind::Wakeup: return "wakeup";
    case EventKind::Fault: return "fault";
    }
    return "unknown";
}

EventId Scheduler::schedule(VirtualTime fire_at, EventKind kind, Handler handler)
{
    if (fire_at < now_) {
        throw std::logic_error("schedule: fire_at " + std::to_string(fire_at.ticks) + " is before now "
                               + std::to_string(now_.ticks));
    }
    const auto seq = next_seq_++;
    queue_.push_back(Entry{fire_at, seq, kind, std::move(handler)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
    return seq;
}

std::size_t Scheduler::run_until(VirtualTime t)
{
    if (t < now_) {
        throw std::logic_error("run_until: target time is before now");
    }
    std::size_t executed = 0;
    while (!queue_.empty() && queue_.front().fire_at <= t) {
        std::pop_heap(queue_.begin(), queue_.end(), Later{});
        Entry entry = std::move(queue_.back());
        queue_.pop_back();
        now_ = entry.fire_at;
        if (record_log_) {
            log_.push_back(ExecutedEvent{entry.fire_at, entry.seq, entry.kind});
        }
        entry.handler();
        ++executed;
    }
    now_ = t;
    return executed;
}

double Rng::uniform01()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p)
{
    if (p <= 0.0) {
        return false;
    }
    if (p >= 1.0) {
        return true;
    }
    return uniform01() < p;
}

double Rng::normal(double mean, double sigma)
{
    if (sigma == 0.0) {
        return mean;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi)
{
    if (hi < lo) {
        throw std::invalid_argument("uniform_int: empty range");
    }
    const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == UINT64_MAX) {
        return static_cast<std::int64_t>(engine_());
    }
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range + 1) % range;
    std::uint64_t draw = engine_();
    while (draw > limit) {
        draw = engine_();
    }
    return lo + static_cast<std::int64_t>(draw % range);
}

}  // namespace lorastream
