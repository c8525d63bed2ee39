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


#include "lorastream/state_store.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace lorastream::state {
namespace {

Snapshot sample(std::uint64_t epoch)
{
    OperatorState op;
    const EntityId ids[] = {{1, 2}, {3, 4}};
    op.commit(42, "k", ids, CommittedValue{42, 5, 6, at_ms(1000)});
    op.set_epoch(epoch);
    return Snapshot{epoch, {{"operator", op.serialize()}, {"extra", {1, 2, 3}}}};
}

TEST(OperatorState, CommitIsIdempotent)
{
    OperatorState op;
    const EntityId ids[] = {{1, 0}};
    EXPECT_FALSE(op.is_committed(7));
    EXPECT_TRUE(op.commit(7, "k", ids, CommittedValue{7, 1, 2, at_ms(10)}));
    EXPECT_TRUE(op.is_committed(7));
    EXPECT_TRUE(op.is_processed(EntityId{1, 0}));
    EXPECT_FALSE(op.commit(7, "k", ids, CommittedValue{7, 9, 9, at_ms(20)}));
    EXPECT_EQ(op.latest_values().at("k").value1, 1);
}

TEST(OperatorState, LatestValueFollowsWindowEnd)
{
    OperatorState op;
    op.commit(1, "k", {}, CommittedValue{1, 1, 1, at_ms(2000)});
    op.commit(2, "k", {}, CommittedValue{2, 2, 2, at_ms(1000)});
    EXPECT_EQ(op.latest_values().at("k").output_id, 1u);
}

TEST(OperatorState, SerializeRoundTrip)
{
    OperatorState op;
    const EntityId ids[] = {{1, 2}};
    op.commit(5, "a", ids, CommittedValue{5, -1, 3, at_ms(100)});
    op.set_epoch(3);
    EXPECT_EQ(OperatorState::deserialize(op.serialize()), op);
}

TEST(SnapshotCodec, RoundTrip)
{
    const auto s = sample(2);
    EXPECT_EQ(decode_snapshot(encode_snapshot(s)), s);
}

TEST(SnapshotCodec, AnyFlippedByteIsDetected)
{
    const auto bytes = encode_snapshot(sample(1));
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        auto copy = bytes;
        copy[i] ^= 0x01;
        EXPECT_THROW(decode_snapshot(copy), CorruptSnapshot) << "offset " << i;
    }
    EXPECT_THROW(decode_snapshot(std::vector<std::uint8_t>(5, 0)), CorruptSnapshot);
}

TEST(MemoryStore, PersistLoadLatest)
{
    MemorySnapshotStore store;
    EXPECT_EQ(store.latest_epoch(), std::nullopt);
    store.persist(sample(1));
    store.persist(sample(2));
    EXPECT_EQ(store.latest_epoch(), 2u);
    EXPECT_EQ(store.load(1), sample(1));
    EXPECT_EQ(store.load(7), std::nullopt);
}

TEST(MemoryStore, CorruptionRefusesToLoad)
{
    MemorySnapshotStore store;
    store.persist(sample(1));
    store.corrupt(1, 10);
    EXPECT_THROW(store.load(1), CorruptSnapshot);
}

TEST(DirectoryStore, FilesPerEpochAndChecksum)
{
    const auto dir = std::filesystem::temp_directory_path() / "lorastream_store_test";
    std::filesystem::remove_all(dir);
    {
        DirectorySnapshotStore store(dir);
        store.persist(sample(1));
        store.persist(sample(2));
        EXPECT_TRUE(std::filesystem::exists(dir / "epoch-1.bin"));
        EXPECT_EQ(store.path_for(2), dir / "epoch-2.bin");
        EXPECT_EQ(store.latest_epoch(), 2u);
        EXPECT_EQ(store.load(2), sample(2));
    }
    {
        std::fstream f(dir / "epoch-2.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(12);
        f.put('\x7f');
    }
    DirectorySnapshotStore reopened(dir);
    EXPECT_EQ(reopened.latest_epoch(), 2u);
    EXPECT_THROW(reopened.load(2), CorruptSnapshot);
    EXPECT_EQ(reopened.load(1), sample(1));
    std::filesystem::remove_all(dir);
}

TEST(EpochLedger, QuiescentFirstCheckpoint)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    ledger.checkpoint(Snapshot{1, {}});
    EXPECT_EQ(ledger.current_epoch(), 1u);
    EXPECT_EQ(store.load(1)->sections.size(), 0u);
}

TEST(EpochLedger, EpochsMustBeContiguous)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    ledger.checkpoint(sample(1));
    EXPECT_THROW(ledger.checkpoint(sample(3)), std::invalid_argument);
    EXPECT_THROW(ledger.checkpoint(sample(1)), std::invalid_argument);
    EXPECT_EQ(ledger.current_epoch(), 1u);
}

TEST(EpochLedger, FailedPersistDoesNotAdvance)
{
    MemorySnapshotStore store;
    store.fail_epochs({2});
    EpochLedger ledger(store);
    ledger.checkpoint(sample(1));
    EXPECT_THROW(ledger.checkpoint(sample(2)), PersistenceError);
    EXPECT_EQ(ledger.current_epoch(), 1u);
    EXPECT_EQ(store.latest_epoch(), 1u);
}

TEST(EpochLedger, RestoreZeroIsPristine)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    ledger.checkpoint(sample(1));
    EXPECT_EQ(ledger.restore(0), Snapshot{});
    EXPECT_EQ(ledger.current_epoch(), 0u);
}

TEST(EpochLedger, RestoreMissingEpochThrows)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    EXPECT_THROW(ledger.restore(4), MissingEpoch);
}

TEST(EpochLedger, RestoreOfCorruptEpochThrows)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    ledger.checkpoint(sample(1));
    store.corrupt(1, 3);
    EXPECT_THROW(ledger.restore(1), CorruptSnapshot);
}

TEST(EpochLedger, IdsCommittedAfterRestoredEpochAreForgotten)
{
    MemorySnapshotStore store;
    EpochLedger ledger(store);
    OperatorState op;
    op.commit(1, "k", {}, CommittedValue{1, 0, 0, at_ms(1)});
    op.set_epoch(1);
    ledger.checkpoint(Snapshot{1, {{"operator", op.serialize()}}});
    op.commit(2, "k", {}, CommittedValue{2, 0, 0, at_ms(2)});
    EXPECT_TRUE(op.is_committed(2));

    const auto snapshot = ledger.restore(1);
    const auto restored = OperatorState::deserialize(*snapshot.section("operator"));
    EXPECT_TRUE(restored.is_committed(1));
    EXPECT_FALSE(restored.is_committed(2));
}

TEST(Markers, PreMarkerItemOnSlowChannelIsRecorded)
{
    Channel<int> a;
    Channel<int> b;
    MarkerRecorder<int> recorder(2);
    b.push(17);  // sent before the snapshot began
    a.push_marker(Marker{1, at_ms(5)});
    b.push_marker(Marker{1, at_ms(5)});
    a.push(18);  // sent after the marker on a: next epoch

    std::vector<int> local_after_record;
    bool recorded = false;
    auto drain = [&](Channel<int>& ch, std::size_t index) {
        auto element = ch.pop();
        if (const auto* m = std::get_if<Marker>(&element)) {
            recorded = recorder.on_marker(index, *m) || recorded;
        }
        else {
            const int item = std::get<int>(element);
            if (!recorder.on_item(index, item)) {
                local_after_record.push_back(item);
            }
        }
    };
    drain(a, 0);  // marker on a: record local state now
    EXPECT_TRUE(recorded);
    EXPECT_FALSE(recorder.complete());
    drain(b, 1);  // 17 was in flight on b
    drain(b, 1);  // marker on b
    drain(a, 0);  // 18 belongs to epoch 2
    EXPECT_TRUE(recorder.complete());
    EXPECT_EQ(recorder.channel_state(1), std::vector<int>{17});
    EXPECT_TRUE(recorder.channel_state(0).empty());
    EXPECT_EQ(local_after_record, std::vector<int>{18});
}

TEST(Markers, DisciplineViolationsThrow)
{
    MarkerRecorder<int> recorder(2);
    recorder.on_marker(0, Marker{1, at_ms(0)});
    EXPECT_THROW(recorder.on_marker(0, Marker{1, at_ms(0)}), std::logic_error);
    EXPECT_THROW(recorder.on_marker(1, Marker{2, at_ms(0)}), std::logic_error);
    recorder.reset();
    EXPECT_FALSE(recorder.in_progress());
}

TEST(Journal, AppendAndSlice)
{
    InputJournal<int> j;
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(j.append(i), static_cast<std::size_t>(i));
    }
    EXPECT_EQ(j.from(3).size(), 2u);
    EXPECT_EQ(j.from(9).size(), 0u);
    EXPECT_EQ(j.at(4), 4);
}

TEST(Fnv, KnownVector)
{
    const std::string text = "a";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    EXPECT_EQ(fnv1a64(bytes), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace lorastream::state
