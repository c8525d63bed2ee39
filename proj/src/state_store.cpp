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

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <regex>

namespace lorastream::state {

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'S', 'N', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffU));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <class T>
    T get()
    {
        need(sizeof(T));
        std::uint64_t value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(value);
    }

    std::span<const std::uint8_t> take(std::size_t n)
    {
        need(n);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) {
            throw CorruptSnapshot("snapshot truncated");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const EntityId& id)
{
    return std::to_string(id.device) + ":" + std::to_string(id.counter);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed)
{
    std::uint64_t hash = seed;
    for (std::uint8_t b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

bool OperatorState::commit(OutputId id, const std::string& key, std::span<const EntityId> entities,
                           CommittedValue value)
{
    if (!committed_ids_.insert(id).second) {
        return false;
    }
    processed_entities_.insert(entities.begin(), entities.end());
    auto it = latest_values_.find(key);
    if (it == latest_values_.end() || it->second.window_end <= value.window_end) {
        latest_values_[key] = value;
    }
    return true;
}

std::vector<std::uint8_t> OperatorState::serialize() const
{
    nlohmann::json j;
    j["epoch"] = epoch_;
    j["committed"] = committed_ids_;
    auto& entities = j["entities"] = nlohmann::json::array();
    for (const auto& e : processed_entities_) {
        entities.push_back({e.device, e.counter});
    }
    auto& latest = j["latest"] = nlohmann::json::object();
    for (const auto& [key, v] : latest_values_) {
        latest[key] = {v.output_id, v.value1, v.value2, v.window_end.ticks};
    }
    return nlohmann::json::to_cbor(j);
}

OperatorState OperatorState::deserialize(std::span<const std::uint8_t> bytes)
{
    const auto j = nlohmann::json::from_cbor(bytes.begin(), bytes.end());
    OperatorState s;
    s.epoch_ = j.at("epoch").get<std::uint64_t>();
    s.committed_ids_ = j.at("committed").get<std::set<OutputId>>();
    for (const auto& e : j.at("entities")) {
        s.processed_entities_.insert(EntityId{e.at(0).get<DeviceId>(), e.at(1).get<FrameCounter>()});
    }
    for (const auto& [key, v] : j.at("latest").items()) {
        s.latest_values_[key] = CommittedValue{v.at(0).get<OutputId>(), v.at(1).get<std::int64_t>(),
                                               v.at(2).get<std::int64_t>(), VirtualTime{v.at(3).get<std::int64_t>()}};
    }
    return s;
}

const std::vector<std::uint8_t>* Snapshot::section(std::string_view name) const
{
    for (const auto& [n, bytes] : sections) {
        if (n == name) {
            return &bytes;
        }
    }
    return nullptr;
}

std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot)
{
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, snapshot.epoch);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.sections.size()));
    for (const auto& [name, payload] : snapshot.sections) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_le<std::uint64_t>(out, payload.size());
        out.insert(out.end(), payload.begin(), payload.end());
    }
    put_le<std::uint64_t>(out, fnv1a64(out));
    return out;
}

Snapshot decode_snapshot(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < sizeof(kMagic) + 4 + 8 + 4 + 8) {
        throw CorruptSnapshot("snapshot too short");
    }
    const auto body = bytes.first(bytes.size() - 8);
    Reader trailer(bytes.last(8));
    if (trailer.get<std::uint64_t>() != fnv1a64(body)) {
        throw CorruptSnapshot("snapshot checksum mismatch");
    }
    Reader in(body);
    const auto magic = in.take(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        throw CorruptSnapshot("bad snapshot magic");
    }
    if (in.get<std::uint32_t>() != kVersion) {
        throw CorruptSnapshot("unsupported snapshot version");
    }
    Snapshot snapshot;
    snapshot.epoch = in.get<std::uint64_t>();
    const auto count = in.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = in.get<std::uint32_t>();
        const auto name = in.take(name_len);
        const auto payload_len = in.get<std::uint64_t>();
        const auto payload = in.take(payload_len);
        snapshot.sections.emplace_back(std::string(name.begin(), name.end()),
                                       std::vector<std::uint8_t>(payload.begin(), payload.end()));
    }
    if (in.remaining() != 0) {
        throw CorruptSnapshot("trailing bytes in snapshot");
    }
    return snapshot;
}

DirectorySnapshotStore::DirectorySnapshotStore(std::filesystem::path directory) : directory_(std::move(directory))
{
    std::filesystem::create_directories(directory_);
}

std::filesystem::path DirectorySnapshotStore::path_for(std::uint64_t epoch) const
{
    return directory_ / ("epoch-" + std::to_string(epoch) + ".bin");
}

void DirectorySnapshotStore::persist(const Snapshot& snapshot)
{
    const auto bytes = encode_snapshot(snapshot);
    const auto final_path = path_for(snapshot.epoch);
    auto tmp_path = final_path;
    tmp_path += ".tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw PersistenceError("cannot open " + tmp_path.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw PersistenceError("short write to " + tmp_path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) {
        std::filesystem::remove(tmp_path, ec);
        throw PersistenceError("cannot publish " + final_path.string());
    }
}

std::optional<Snapshot> DirectorySnapshotStore::load(std::uint64_t epoch) const
{
    const auto path = path_for(epoch);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto snapshot = decode_snapshot(bytes);
    if (snapshot.epoch != epoch) {
        throw CorruptSnapshot("snapshot file " + path.string() + " holds a different epoch");
    }
    return snapshot;
}

std::optional<std::uint64_t> DirectorySnapshotStore::latest_epoch() const
{
    static const std::regex pattern(R"(epoch-(\d+)\.bin)");
    std::optional<std::uint64_t> latest;
    if (!std::filesystem::exists(directory_)) {
        return latest;
    }
    for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
        std::smatch m;
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) {
            const std::uint64_t epoch = std::stoull(m[1].str());
            latest = std::max<std::uint64_t>(latest.value_or(0), epoch);
        }
    }
    return latest;
}

void MemorySnapshotStore::persist(const Snapshot& snapshot)
{
    if (failing_.contains(snapshot.epoch)) {
        throw PersistenceError("injected persistence failure for epoch " + std::to_string(snapshot.epoch));
    }
    files_[snapshot.epoch] = encode_snapshot(snapshot);
}

std::optional<Snapshot> MemorySnapshotStore::load(std::uint64_t epoch) const
{
    auto it = files_.find(epoch);
    if (it == files_.end()) {
        return std::nullopt;
    }
    return decode_snapshot(it->second);
}

std::optional<std::uint64_t> MemorySnapshotStore::latest_epoch() const
{
    if (files_.empty()) {
        return std::nullopt;
    }
    return files_.rbegin()->first;
}

void MemorySnapshotStore::corrupt(std::uint64_t epoch, std::size_t byte_offset)
{
    auto& bytes = files_.at(epoch);
    bytes.at(byte_offset) ^= 0x5aU;
}

void EpochLedger::checkpoint(const Snapshot& snapshot)
{
    if (snapshot.epoch != current_ + 1) {
        throw std::invalid_argument("checkpoint of epoch " + std::to_string(snapshot.epoch) + " while at epoch " +
                                    std::to_string(current_));
    }
    store_.persist(snapshot);
    current_ = snapshot.epoch;
}

Snapshot EpochLedger::restore(std::uint64_t epoch)
{
    if (epoch == 0) {
        current_ = 0;
        return Snapshot{};
    }
    auto snapshot = store_.load(epoch);
    if (!snapshot) {
        throw MissingEpoch("no snapshot for epoch " + std::to_string(epoch));
    }
    current_ = epoch;
    return std::move(*snapshot);
}

}  // namespace lorastream::state
