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


#include "lorastream/join_engine.hpp"

#include <gtest/gtest.h>

namespace lorastream::join {
namespace {

const WindowSpan kW0{0, at_ms(0), at_ms(1000)};
const WindowSpan kW1{1, at_ms(1000), at_ms(2000)};

StreamEntry entry(int stream, FrameCounter fc, std::int64_t t, std::int64_t value = 0, GatewayId gw = 1)
{
    return StreamEntry{"k", stream, EntityId{static_cast<DeviceId>(stream), fc}, value, at_ms(t), at_ms(t + 5), gw};
}

auto mode_fn(FiringMode m)
{
    return [m](const std::string&) { return m; };
}

TEST(FiringPolicy, TruthTable)
{
    EXPECT_EQ(firing_policy(1200, 1500, 1000), FiringMode::AllowLate);
    EXPECT_EQ(firing_policy(200, 300, 1000), FiringMode::AllowEarly);
    EXPECT_EQ(firing_policy(200, 1500, 1000), FiringMode::OnTime);
    EXPECT_EQ(firing_policy(1500, 200, 1000), FiringMode::OnTime);
    EXPECT_EQ(firing_policy(1000, 1000, 1000), FiringMode::AllowEarly);
}

TEST(Offer, InsideBoundsAccepted)
{
    Shard shard(1, {1});
    state::OperatorState op;
    const auto r = shard.offer(entry(1, 0, 10), kW0, FiringMode::OnTime, op, at_ms(15));
    EXPECT_EQ(r.outcome, OfferOutcome::Accepted);
    ASSERT_NE(shard.cell("k", 0), nullptr);
    EXPECT_EQ(shard.cell("k", 0)->slot1->entity, (EntityId{1, 0}));
}

TEST(Offer, CommittedEntityIsStale)
{
    Shard shard(1, {1});
    state::OperatorState op;
    const EntityId ids[] = {{1, 0}};
    op.commit(99, "k", ids, {});
    EXPECT_EQ(shard.offer(entry(1, 0, 10), kW0, FiringMode::OnTime, op, at_ms(15)).outcome,
              OfferOutcome::StaleRejected);
}

TEST(Offer, EarlyThenAcceptedWhenWindowOpens)
{
    Shard shard(1, {1});
    state::OperatorState op;
    EXPECT_EQ(shard.offer(entry(2, 0, 1500), std::nullopt, FiringMode::OnTime, op, at_ms(1500)).outcome,
              OfferOutcome::Early);
    const auto held = shard.take_early();
    ASSERT_EQ(held.size(), 1u);
    EXPECT_EQ(shard.offer(held[0], kW1, FiringMode::OnTime, op, at_ms(2000)).outcome, OfferOutcome::Accepted);
    EXPECT_TRUE(shard.take_early().empty());
}

TEST(Offer, LatestEventTimeWinsPerStream)
{
    Shard shard(1, {1});
    state::OperatorState op;
    shard.offer(entry(1, 1, 500, 11), kW0, FiringMode::OnTime, op, at_ms(600));
    shard.offer(entry(1, 0, 100, 10), kW0, FiringMode::OnTime, op, at_ms(700));
    EXPECT_EQ(shard.cell("k", 0)->slot1->value, 11);
}

TEST(Offer, ClosedWindowIsLate)
{
    Shard shard(1, {1});
    state::OperatorState op;
    shard.close_window(0, FireReason::Watermark, at_ms(1500), mode_fn(FiringMode::OnTime));
    EXPECT_EQ(shard.offer(entry(1, 0, 10), kW0, FiringMode::OnTime, op, at_ms(1600)).outcome, OfferOutcome::Late);
    EXPECT_EQ(shard.offer(entry(1, 0, 10), kW0, FiringMode::AllowLate, op, at_ms(1600)).outcome,
              OfferOutcome::Accepted);
}

TEST(Offer, LocalEarlyFiring)
{
    Shard shard(1, {1});
    state::OperatorState op;
    shard.offer(entry(1, 0, 10, 1), kW0, FiringMode::AllowEarly, op, at_ms(20));
    const auto r = shard.offer(entry(2, 0, 30, 2), kW0, FiringMode::AllowEarly, op, at_ms(40));
    ASSERT_TRUE(r.early_output);
    EXPECT_EQ(r.early_output->produced_at, at_ms(40));
    EXPECT_LT(r.early_output->produced_at, kW0.end);
    EXPECT_EQ(shard.offer(entry(1, 1, 50), kW0, FiringMode::AllowEarly, op, at_ms(60)).outcome,
              OfferOutcome::AlreadyFired);
}

TEST(Offer, RejectsBadStreamAndUncoveredWindow)
{
    Shard shard(1, {1});
    state::OperatorState op;
    auto bad = entry(1, 0, 10);
    bad.stream = 3;
    EXPECT_THROW(shard.offer(bad, kW0, FiringMode::OnTime, op, at_ms(0)), std::invalid_argument);
    EXPECT_THROW(shard.offer(entry(1, 0, 1500), kW0, FiringMode::OnTime, op, at_ms(0)), std::logic_error);
}

TEST(Fire, CompleteCellGivesOutputOnce)
{
    Accumulator a{"k", 0, at_ms(0), at_ms(999), Slot{{1, 0}, 4, at_ms(5)}, Slot{{2, 0}, 6, at_ms(7)}, false};
    const auto first = fire(a, FireReason::Watermark, at_ms(1500));
    ASSERT_TRUE(std::holds_alternative<JoinedOutput>(first));
    EXPECT_EQ(std::get<JoinedOutput>(first).window_end, at_ms(1000));
    EXPECT_TRUE(std::holds_alternative<NoOp>(fire(a, FireReason::Watermark, at_ms(1600))));
}

TEST(Fire, MissingStreamIsIncomplete)
{
    Accumulator a{"k", 0, at_ms(0), at_ms(999), Slot{{1, 0}, 4, at_ms(5)}, std::nullopt, false};
    const auto r = fire(a, FireReason::Watermark, at_ms(1500));
    ASSERT_TRUE(std::holds_alternative<Incomplete>(r));
    EXPECT_EQ(std::get<Incomplete>(r).missing_streams, std::vector<int>{2});
}

TEST(Fire, EarlyNeedsBothSlots)
{
    Accumulator a{"k", 0, at_ms(0), at_ms(999), std::nullopt, std::nullopt, false};
    EXPECT_THROW(fire(a, FireReason::EarlyComplete, at_ms(1)), std::logic_error);
}

TEST(CloseWindow, LateCellsWaitForLateDeadline)
{
    Shard shard(1, {1});
    state::OperatorState op;
    shard.offer(entry(1, 0, 10), kW0, FiringMode::AllowLate, op, at_ms(20));
    shard.offer(entry(2, 0, 10), kW0, FiringMode::AllowLate, op, at_ms(20));
    EXPECT_TRUE(shard.close_window(0, FireReason::Watermark, at_ms(1500), mode_fn(FiringMode::AllowLate)).empty());
    const auto fired = shard.close_window(0, FireReason::LateDeadline, at_ms(2500), mode_fn(FiringMode::AllowLate));
    ASSERT_EQ(fired.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<JoinedOutput>(fired[0]));
    EXPECT_TRUE(shard.accumulators().empty());
}

TEST(Merge, SameOutputFromTwoShardsCommitsOnce)
{
    state::OperatorState op;
    Shard a(1, {1, 2});
    Shard b(2, {2, 3});
    for (auto* shard : {&a, &b}) {
        shard->offer(entry(1, 0, 10, 1, 2), kW0, FiringMode::OnTime, op, at_ms(20));
        shard->offer(entry(2, 0, 20, 2, 2), kW0, FiringMode::OnTime, op, at_ms(30));
    }
    std::vector<FireResult> results;
    for (auto* shard : {&a, &b}) {
        for (auto& r : shard->close_window(0, FireReason::Watermark, at_ms(1500), mode_fn(FiringMode::OnTime))) {
            results.push_back(r);
        }
    }
    const auto merged = merge_partials(results, op);
    EXPECT_EQ(merged.committed.size(), 1u);
    EXPECT_TRUE(merged.incomplete.empty());
    EXPECT_EQ(op.committed_ids().size(), 1u);
}

TEST(Merge, SplitPartialsCompleteEachOther)
{
    state::OperatorState op;
    Incomplete p1{"k", 0, at_ms(1000), Slot{{1, 0}, 1, at_ms(5)}, std::nullopt, {2}, at_ms(1500)};
    Incomplete p2{"k", 0, at_ms(1000), std::nullopt, Slot{{2, 0}, 2, at_ms(6)}, {1}, at_ms(1500)};
    const auto merged = merge_partials({p1, p2}, op);
    ASSERT_EQ(merged.committed.size(), 1u);
    EXPECT_EQ(merged.committed[0].value2, 2);
}

TEST(Merge, DisjointKeysPassThrough)
{
    state::OperatorState op;
    JoinedOutput x{"a", 0, 1, 2, {1, 0}, {2, 0}, at_ms(1), at_ms(2), at_ms(1000), make_output_id("a", {1, 0}, {2, 0}, at_ms(1000)), at_ms(1500)};
    JoinedOutput y{"b", 0, 1, 2, {3, 0}, {4, 0}, at_ms(1), at_ms(2), at_ms(1000), make_output_id("b", {3, 0}, {4, 0}, at_ms(1000)), at_ms(1500)};
    EXPECT_EQ(merge_partials({x, y}, op).committed.size(), 2u);
}

TEST(Merge, ReplayOfCommittedIdIsDropped)
{
    state::OperatorState op;
    JoinedOutput x{"a", 0, 1, 2, {1, 0}, {2, 0}, at_ms(1), at_ms(2), at_ms(1000), make_output_id("a", {1, 0}, {2, 0}, at_ms(1000)), at_ms(1500)};
    EXPECT_EQ(merge_partials({x}, op).committed.size(), 1u);
    const auto restored = state::OperatorState::deserialize(op.serialize());
    auto after_restart = restored;
    EXPECT_TRUE(merge_partials({x}, after_restart).committed.empty());
}

TEST(OutputId, StableAndSensitive)
{
    const auto a = make_output_id("k", {1, 2}, {3, 4}, at_ms(1000));
    EXPECT_EQ(a, make_output_id("k", {1, 2}, {3, 4}, at_ms(1000)));
    EXPECT_NE(a, make_output_id("k", {1, 2}, {3, 5}, at_ms(1000)));
    EXPECT_NE(a, make_output_id("j", {1, 2}, {3, 4}, at_ms(1000)));
    EXPECT_NE(a, make_output_id("k", {1, 2}, {3, 4}, at_ms(1001)));
}

TEST(Shard, StateRoundTrip)
{
    Shard shard(3, {1, 2});
    state::OperatorState op;
    shard.offer(entry(1, 0, 10), kW0, FiringMode::OnTime, op, at_ms(20));
    shard.offer(entry(1, 5, 1200), std::nullopt, FiringMode::OnTime, op, at_ms(1210));
    auto copy = Shard::from_state(shard.state());
    EXPECT_EQ(copy.accumulators(), shard.accumulators());
    EXPECT_EQ(copy.take_early().size(), 1u);
    EXPECT_THROW(Shard(4, {}), std::invalid_argument);
}

}  // namespace
}  // namespace lorastream::join
