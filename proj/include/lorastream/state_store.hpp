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

#include "lorastream/lora_network.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace lorastream::state {

using OutputId = std::uint64_t;

/// Identity of one device update: the device and the frame that carried it.
struct EntityId {
    DeviceId device = 0;
    FrameCounter counter = 0;

    auto operator<=>(const EntityId&) const = default;
};

std::string to_string(const EntityId& id);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

struct CommittedValue {
    OutputId output_id = 0;
    std::int64_t value1 = 0;
    std::int64_t value2 = 0;
    VirtualTime window_end;

    bool operator==(const CommittedValue&) const = default;
};

/// The exactly-once ledger: which join outputs and which device updates have
/// been committed, plus the latest committed value per key.
class OperatorState {
public:
    bool is_committed(OutputId id) const { return committed_ids_.contains(id); }
    bool is_processed(const EntityId& id) const { return processed_entities_.contains(id); }

    /// Returns false and changes nothing if the id is already committed.
    bool commit(OutputId id, const std::string& key, std::span<const EntityId> entities, CommittedValue value);

    std::uint64_t epoch() const { return epoch_; }
    void set_epoch(std::uint64_t epoch) { epoch_ = epoch; }

    const std::set<OutputId>& committed_ids() const { return committed_ids_; }
    const std::set<EntityId>& processed_entities() const { return processed_entities_; }
    const std::map<std::string, CommittedValue>& latest_values() const { return latest_values_; }

    std::vector<std::uint8_t> serialize() const;
    static OperatorState deserialize(std::span<const std::uint8_t> bytes);

    bool operator==(const OperatorState&) const = default;

private:
    std::set<OutputId> committed_ids_;
    std::set<EntityId> processed_entities_;
    std::map<std::string, CommittedValue> latest_values_;
    std::uint64_t epoch_ = 0;
};

/// A persisted epoch: named binary sections sealed by a checksum on disk.
struct Snapshot {
    std::uint64_t epoch = 0;
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections;

    const std::vector<std::uint8_t>* section(std::string_view name) const;

    bool operator==(const Snapshot&) const = default;
};

class CorruptSnapshot : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PersistenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout: "LSNP" magic, u32 version, u64 epoch, u32 section count, then per
/// section u32 name length, name, u64 payload length, payload; finally a u64
/// FNV-1a checksum of every preceding byte. Integers are little-endian.
std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot);

/// Throws CorruptSnapshot on a bad checksum or malformed layout.
Snapshot decode_snapshot(std::span<const std::uint8_t> bytes);

class SnapshotStore {
public:
    virtual ~SnapshotStore() = default;
    /// Throws PersistenceError; a failed write leaves no epoch behind.
    virtual void persist(const Snapshot& snapshot) = 0;
    /// nullopt when the epoch was never persisted. Throws CorruptSnapshot.
    virtual std::optional<Snapshot> load(std::uint64_t epoch) const = 0;
    virtual std::optional<std::uint64_t> latest_epoch() const = 0;
};

/// One file per epoch, snapshots/epoch-<n>.bin, written via rename.
class DirectorySnapshotStore final : public SnapshotStore {
public:
    explicit DirectorySnapshotStore(std::filesystem::path directory);

    void persist(const Snapshot& snapshot) override;
    std::optional<Snapshot> load(std::uint64_t epoch) const override;
    std::optional<std::uint64_t> latest_epoch() const override;

    std::filesystem::path path_for(std::uint64_t epoch) const;

private:
    std::filesystem::path directory_;
};

class MemorySnapshotStore final : public SnapshotStore {
public:
    void persist(const Snapshot& snapshot) override;
    std::optional<Snapshot> load(std::uint64_t epoch) const override;
    std::optional<std::uint64_t> latest_epoch() const override;

    /// Every persist of a listed epoch fails.
    void fail_epochs(std::set<std::uint64_t> epochs) { failing_ = std::move(epochs); }
    /// Flips one byte of a stored epoch.
    void corrupt(std::uint64_t epoch, std::size_t byte_offset);

private:
    std::map<std::uint64_t, std::vector<std::uint8_t>> files_;
    std::set<std::uint64_t> failing_;
};

class MissingEpoch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Epoch numbering over a snapshot store. Epochs advance one at a time and
/// only when the snapshot was persisted.
class EpochLedger {
public:
    explicit EpochLedger(SnapshotStore& store, std::uint64_t current = 0) : store_(store), current_(current) {}

    std::uint64_t current_epoch() const { return current_; }

    /// Throws std::invalid_argument unless snapshot.epoch == current_epoch() + 1.
    /// A PersistenceError propagates and leaves the epoch where it was.
    void checkpoint(const Snapshot& snapshot);

    /// Epoch 0 is the pristine empty snapshot. Throws MissingEpoch for an
    /// epoch never persisted; CorruptSnapshot propagates.
    Snapshot restore(std::uint64_t epoch);

private:
    SnapshotStore& store_;
    std::uint64_t current_;
};

struct Marker {
    std::uint64_t epoch = 0;
    VirtualTime injected_at;

    bool operator==(const Marker&) const = default;
};

/// FIFO input channel that can carry snapshot markers between items.
template <class Item>
class Channel {
public:
    using Element = std::variant<Item, Marker>;

    void push(Item item) { queue_.emplace_back(std::in_place_index<0>, std::move(item)); }
    void push_marker(Marker marker) { queue_.emplace_back(std::in_place_index<1>, marker); }
    bool empty() const { return queue_.empty(); }
    std::size_t size() const { return queue_.size(); }

    Element pop()
    {
        Element front = std::move(queue_.front());
        queue_.pop_front();
        return front;
    }

private:
    std::deque<Element> queue_;
};

/// Marker bookkeeping for one consumer reading from several channels. The
/// first marker of an epoch tells the consumer to record its local state;
/// items arriving afterwards on channels whose marker is still outstanding
/// were sent before the snapshot and are recorded as channel state.
template <class Item>
class MarkerRecorder {
public:
    explicit MarkerRecorder(std::size_t channels) : marker_seen_(channels, false), channel_state_(channels) {}

    /// True when this is the first marker of the epoch.
    bool on_marker(std::size_t channel, const Marker& marker)
    {
        const bool first = !epoch_;
        if (first) {
            epoch_ = marker.epoch;
        }
        else if (*epoch_ != marker.epoch) {
            throw std::logic_error("marker for a different epoch while a snapshot is in progress");
        }
        if (marker_seen_.at(channel)) {
            throw std::logic_error("second marker on one channel within an epoch");
        }
        marker_seen_[channel] = true;
        return first;
    }

    /// True when the item was captured as in-flight channel state.
    bool on_item(std::size_t channel, const Item& item)
    {
        if (!epoch_ || marker_seen_.at(channel)) {
            return false;
        }
        channel_state_[channel].push_back(item);
        return true;
    }

    bool in_progress() const { return epoch_.has_value(); }
    bool complete() const
    {
        if (!epoch_) {
            return false;
        }
        for (bool seen : marker_seen_) {
            if (!seen) {
                return false;
            }
        }
        return true;
    }
    std::optional<std::uint64_t> epoch() const { return epoch_; }
    const std::vector<Item>& channel_state(std::size_t channel) const { return channel_state_.at(channel); }

    void reset()
    {
        epoch_.reset();
        std::fill(marker_seen_.begin(), marker_seen_.end(), false);
        for (auto& items : channel_state_) {
            items.clear();
        }
    }

private:
    std::optional<std::uint64_t> epoch_;
    std::vector<bool> marker_seen_;
    std::vector<std::vector<Item>> channel_state_;
};

/// Durable, append-only record of everything the orchestrator consumed.
/// Survives orchestrator failure so a standby can replay past a snapshot.
template <class Entry>
class InputJournal {
public:
    std::size_t append(Entry entry)
    {
        entries_.push_back(std::move(entry));
        return entries_.size() - 1;
    }
    std::size_t size() const { return entries_.size(); }
    const Entry& at(std::size_t offset) const { return entries_.at(offset); }
    std::span<const Entry> from(std::size_t offset) const
    {
        return std::span<const Entry>(entries_).subspan(std::min(offset, entries_.size()));
    }

private:
    std::vector<Entry> entries_;
};

}  // namespace lorastream::state
