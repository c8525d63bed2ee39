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
#include "math_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lorastream::windowing {
namespace {

TEST(InitialWindow, LcmOfTransmissionTimes)
{
    EXPECT_EQ(initial_window(2, 1, 3, 1), 6000);
    EXPECT_EQ(initial_window(4, 1, 8, 2), 4000);
    EXPECT_EQ(initial_window(3, 2, 1, 1), 3000);
    EXPECT_THROW(initial_window(0, 1, 1, 1), std::invalid_argument);
    EXPECT_THROW(initial_window(1, 1, 1, -2), std::invalid_argument);
}

TEST(InitialWindow, MatchesSearchOracle)
{
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        const auto m1 = rng.uniform_int(1, 60);
        const auto s1 = rng.uniform_int(1, 60);
        const auto m2 = rng.uniform_int(1, 60);
        const auto s2 = rng.uniform_int(1, 60);
        const auto expected =
            oracle::lcm_by_search(oracle::transmission_ms(m1, s1), oracle::transmission_ms(m2, s2));
        ASSERT_EQ(initial_window(m1, s1, m2, s2), expected);
    }
}

TEST(TransmissionTime, RoundsUp)
{
    EXPECT_EQ(transmission_time_ms(1, 3), 334);
    EXPECT_EQ(transmission_time_ms(50, 25), 2000);
}

TEST(MovingAverage, SingleRecord)
{
    const std::vector<WindowRecord> h{{5000, 10, 0, 0}};
    EXPECT_EQ(moving_average(h, 5), 5000);
}

TEST(MovingAverage, MessageWeighted)
{
    const std::vector<WindowRecord> h{{4000, 10, 0, 0}, {8000, 30, 0, 0}};
    EXPECT_EQ(moving_average(h, 5), 7000);
}

TEST(MovingAverage, BreachedWindowsWeighZero)
{
    std::vector<WindowRecord> h{{4000, 10, 6, 0}, {8000, 30, 0, 0}};
    EXPECT_EQ(moving_average(h, 5), 8000);
    h[1].late_entries = 9;
    EXPECT_EQ(moving_average(h, 5), std::nullopt);
}

TEST(MovingAverage, ThresholdIsStrict)
{
    const std::vector<WindowRecord> h{{4000, 10, 5, 0}};
    EXPECT_EQ(moving_average(h, 5), 4000);
}

TEST(MovingAverage, WithinRoundingOfOracle)
{
    Rng rng(31);
    for (int i = 0; i < 300; ++i) {
        std::vector<WindowRecord> h;
        const auto n = rng.uniform_int(1, 20);
        for (std::int64_t j = 0; j < n; ++j) {
            h.push_back({rng.uniform_int(1, 10000), static_cast<std::uint64_t>(rng.uniform_int(0, 50)),
                         static_cast<std::uint64_t>(rng.uniform_int(0, 10)), 0});
        }
        const auto got = moving_average(h, 5);
        const auto want = oracle::moving_average(h, 5);
        ASSERT_EQ(got.has_value(), want.has_value());
        if (got) {
            ASSERT_LE(std::abs(static_cast<double>(*got) - *want), 1.0);
        }
    }
}

TEST(ObservedLatency, MeanAndP95)
{
    const std::vector<Millis> v{10, 20, 30, 41};
    EXPECT_EQ(observed_latency(v, LatencyStatistic::Mean), 25);
    EXPECT_EQ(observed_latency(v, LatencyStatistic::P95), 41);
    std::vector<Millis> hundred;
    for (Millis i = 1; i <= 100; ++i) {
        hundred.push_back(i);
    }
    EXPECT_EQ(observed_latency(hundred, LatencyStatistic::P95), 95);
    EXPECT_EQ(observed_latency({}, LatencyStatistic::Mean), std::nullopt);
}

WindowParams params()
{
    WindowParams p;
    p.desired_latency_ms = 500;
    p.window_factor = 0.5;
    p.late_threshold = 5;
    p.history_len = 20;
    return p;
}

TEST(Controller, LowLatencyShrinks)
{
    WindowController c(6000);
    EXPECT_EQ(c.on_recompute_trigger(params(), {6000, 10, 0, 100}), RecomputeBranch::Shrunk);
    EXPECT_EQ(c.current_size(), 3000);
    EXPECT_EQ(c.last_known_good(), 6000);
}

TEST(Controller, LateBreachRevertsToLastKnownGood)
{
    WindowController c(6000);
    c.on_recompute_trigger(params(), {6000, 10, 0, 100});
    EXPECT_EQ(c.on_recompute_trigger(params(), {3000, 10, 8, 900}), RecomputeBranch::Reverted);
    EXPECT_EQ(c.current_size(), 6000);
}

TEST(Controller, HighLatencyWithinThresholdIsUnchanged)
{
    WindowController c(6000);
    EXPECT_EQ(c.on_recompute_trigger(params(), {6000, 10, 2, 900}), RecomputeBranch::Unchanged);
    EXPECT_EQ(c.current_size(), 6000);
}

TEST(Controller, FallbackOrderPicksMovingAverageFirst)
{
    auto p = params();
    p.fallback = FallbackOrder::MovingAverageFirst;
    WindowController c(6000);
    c.on_recompute_trigger(p, {6000, 10, 0, 100});  // -> 3000, lkg 6000
    c.on_recompute_trigger(p, {3000, 30, 0, 100});  // -> 1500, lkg 3000
    c.on_recompute_trigger(p, {1500, 10, 9, 900});  // average of unbreached: (60000+90000)/40
    EXPECT_EQ(c.current_size(), 3750);
}

TEST(Controller, RevertWithoutEvidenceReturnsToBase)
{
    WindowController c(6000);
    auto restored = WindowController::restore(6000, 1000, std::nullopt, {});
    EXPECT_EQ(restored.on_recompute_trigger(params(), {1000, 4, 9, 900}), RecomputeBranch::Reverted);
    EXPECT_EQ(restored.current_size(), 6000);
}

TEST(Controller, ShrinkIsGeometricAndFloored)
{
    auto p = params();
    p.min_size_ms = 700;
    WindowController c(6000);
    std::vector<Millis> sizes;
    for (int i = 0; i < 6; ++i) {
        c.on_recompute_trigger(p, {c.current_size(), 5, 0, 10});
        sizes.push_back(c.current_size());
    }
    EXPECT_EQ(sizes, (std::vector<Millis>{3000, 1500, 750, 700, 700, 700}));
}

TEST(Controller, HistoryIsBounded)
{
    auto p = params();
    p.history_len = 3;
    WindowController c(6000);
    for (int i = 0; i < 10; ++i) {
        c.on_recompute_trigger(p, {6000, 1, 0, 900});
    }
    EXPECT_EQ(c.history().size(), 3u);
}

TEST(Params, ValidateRejectsBadFactor)
{
    auto p = params();
    p.window_factor = 1.5;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.window_factor = 0.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.window_factor = 0.5;
    p.min_size_ms = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lorastream::windowing
