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

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lorastream {

/// Append-only JSON-lines record of a run. Every line carries "t" (virtual
/// milliseconds) and "ev" (event type); keys are emitted in sorted order so
/// equal runs produce byte-identical logs.
class EventLog {
public:
    void emit(VirtualTime at, std::string_view type, nlohmann::json fields = nlohmann::json::object());

    /// While muted, emit() discards lines. Used during journal replay.
    void set_muted(bool muted) { muted_ = muted; }
    bool muted() const { return muted_; }

    const std::vector<std::string>& lines() const { return lines_; }
    std::string text() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> lines_;
    bool muted_ = false;
};

/// Parses a JSON-lines file; throws std::runtime_error naming the bad line.
std::vector<nlohmann::json> read_event_log(const std::filesystem::path& path);
std::vector<nlohmann::json> parse_event_log(std::string_view text);

}  // namespace lorastream
