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

#include "lorastream/event_log.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lorastream {

void EventLog::emit(VirtualTime at, std::string_view type, nlohmann::json fields)
{
    if (muted_) {
        return;
    }
    if (!fields.is_object()) {
        throw std::invalid_argument("event fields must be a JSON object");
    }
    fields["t"] = at.ticks;
    fields["ev"] = type;
    lines_.push_back(fields.dump());
}

std::string EventLog::text() const
{
    std::string out;
    for (const auto& line : lines_) {
        out += line;
        out += '\n';
    }
    return out;
}

void EventLog::write(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text();
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

std::vector<nlohmann::json> parse_event_log(std::string_view text)
{
    std::vector<nlohmann::json> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) {
            continue;
        }
        try {
            auto event = nlohmann::json::parse(line);
            if (!event.is_object() || !event.contains("t") || !event.contains("ev")) {
                throw std::runtime_error("missing t or ev");
            }
            events.push_back(std::move(event));
        }
        catch (const std::exception& e) {
            throw std::runtime_error("event log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

std::vector<nlohmann::json> read_event_log(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_event_log(buffer.str());
}

}  // namespace lorastream
