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

#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace lorastream {

/// Milliseconds of virtual time.
using Millis = std::int64_t;

/// A point on the simulation clock, in millisecond ticks.
struct VirtualTime {
    std::int64_t ticks{0};

    constexpr auto operator<=>(const VirtualTime&) const = default;

    friend constexpr VirtualTime operator+(VirtualTime t, Millis d) { return VirtualTime{t.ticks + d}; }
    friend constexpr VirtualTime operator-(VirtualTime t, Millis d) { return VirtualTime{t.ticks - d}; }
    friend constexpr Millis operator-(VirtualTime a, VirtualTime b) { return a.ticks - b.ticks; }
};

constexpr VirtualTime at_ms(std::int64_t ticks) { return VirtualTime{ticks}; }

enum class EventKind : std::uint8_t {
    Transmit,
    ReceiveWindowOpen,
    Delivery,
    Watermark,
    WindowTrigger,
    Probe,
    CheckpointMarker,
    Wakeup,
    Fault,
};

const char* to_string(EventKind kind);

using EventId = std::uint64_t;

struct ExecutedEvent {
    VirtualTime fire_at;
    std::uint64_t seq;
    EventKind kind;

    bool operator==(const ExecutedEvent&) const = default;
};

/// Single-threaded discrete-event loop. Events with equal fire times run in
/// insertion order. Handlers may schedule further events, including at now().
class Scheduler {
public:
    using Handler = std::function<void()>;

    explicit Scheduler(bool record_log = false) : record_log_(record_log) {}

    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;

    /// Throws std::logic_error when fire_at lies in the past.
    EventId schedule(VirtualTime fire_at, EventKind kind, Handler handler);

    /// Executes every event with fire_at <= t and leaves now() == t.
    std::size_t run_until(VirtualTime t);

    VirtualTime now() const { return now_; }
    std::size_t pending() const { return queue_.size(); }
    const std::vector<ExecutedEvent>& executed() const { return log_; }

private:
    struct Entry {
        VirtualTime fire_at;
        std::uint64_t seq;
        EventKind kind;
        Handler handler;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.fire_at != b.fire_at) {
                return a.fire_at > b.fire_at;
            }
            return a.seq > b.seq;
        }
    };

    VirtualTime now_{};
    std::uint64_t next_seq_ = 0;
    std::vector<Entry> queue_;
    bool record_log_;
    std::vector<ExecutedEvent> log_;
};

/// The run-wide random stream. Built on mt19937_64, whose output sequence is
/// fixed by the standard; the distributions are implemented here rather than
/// taken from <random> so that draws are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform01();

    /// True with probability p. p <= 0 and p >= 1 consume no entropy.
    bool bernoulli(double p);

    /// Box-Muller; consumes two uniforms per call. sigma == 0 consumes nothing.
    double normal(double mean, double sigma);

    /// Uniform integer in [lo, hi], unbiased by rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

}  // namespace lorastream
