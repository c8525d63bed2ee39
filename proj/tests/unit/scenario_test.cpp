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


#include "lorastream/scenario.hpp"
#include "scenario_gen.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

namespace lorastream {
namespace {

using nlohmann::json;

json minimal_json()
{
    return json::parse(R"({
      "seed": 1,
      "duration_ms": 10000,
      "gateways": [{"id": 1, "position": [0, 0]}, {"id": 2, "position": [100, 0]}, {"id": 3, "position": [0, 100]}],
      "devices": [
        {"id": 1, "class": "A", "position": [10, 10], "stream": 1, "key": "k"},
        {"id": 2, "class": "C", "position": [20, 10], "stream": 2, "key": "k"}
      ],
      "quorums": [{"node": 1, "gateways": [1, 2, 3]}, {"node": 2, "gateways": [3, 2, 1]}]
    })");
}

std::string error_of(const json& doc)
{
    try {
        parse_scenario(doc.dump());
    }
    catch (const ScenarioError& e) {
        return e.what();
    }
    return "";
}

TEST(Scenario, MinimalFileParses)
{
    const auto s = parse_scenario(minimal_json().dump());
    EXPECT_EQ(s.devices.size(), 2u);
    EXPECT_EQ(s.device(2).device_class, DeviceClass::C);
    EXPECT_EQ(s.quorum_of(2).gateways.front(), 3u);
    EXPECT_EQ(s.effective_shards().size(), 1u);
    EXPECT_EQ(s.base_composite_window(), 2000);
}

TEST(Scenario, EvenQuorumCitesOddRule)
{
    auto doc = minimal_json();
    doc["quorums"][0]["gateways"] = {1, 2};
    const auto message = error_of(doc);
    EXPECT_NE(message.find("quorums[0].gateways"), std::string::npos) << message;
    EXPECT_NE(message.find("odd number of gateways"), std::string::npos) << message;
}

TEST(Scenario, WindowFactorOutOfRange)
{
    auto doc = minimal_json();
    doc["window"] = {{"window_factor", 1.5}};
    const auto message = error_of(doc);
    EXPECT_NE(message.find("window"), std::string::npos) << message;
    EXPECT_NE(message.find("window_factor"), std::string::npos) << message;
}

TEST(Scenario, ErrorsCarryFieldPaths)
{
    struct Case {
        std::function<void(json&)> edit;
        std::string path;
    };
    const std::vector<Case> cases{
        {[](json& d) { d["quorums"][1]["gateways"][2] = 9; }, "quorums[1].gateways[2]"},
        {[](json& d) { d["devices"][0]["class"] = "D"; }, "devices[0].class"},
        {[](json& d) { d["devices"][1]["stream"] = 1; }, "devices[1]"},
        {[](json& d) { d["devices"][0].erase("key"); }, "devices[0]"},
        {[](json& d) { d["gateways"].erase(2); }, "gateways"},
        {[](json& d) { d["duration_ms"] = 0; }, "duration_ms"},
        {[](json& d) { d["shards"] = {{{"id", 1}, {"gateways", {1, 2}}}}; }, "shards"},
        {[](json& d) { d["faults"] = {{"orchestrator_kill_ms", 20000}}; }, "faults"},
        {[](json& d) { d["link_defaults"] = {{"drop_probability", 2}}; }, "link_defaults"},
    };
    for (const auto& c : cases) {
        auto doc = minimal_json();
        c.edit(doc);
        const auto message = error_of(doc);
        EXPECT_EQ(message.rfind(c.path, 0), 0u) << "expected path " << c.path << ", got: " << message;
    }
}

TEST(Scenario, KillWithoutBackupIsRejected)
{
    auto doc = minimal_json();
    doc["faults"] = {{"orchestrator_kill_ms", 5000}};
    doc["orchestrator"] = {{"backup", false}};
    EXPECT_FALSE(error_of(doc).empty());
    doc["orchestrator"] = {{"backup", true}};
    EXPECT_TRUE(error_of(doc).empty());
}

TEST(Scenario, MalformedJsonIsScenarioError)
{
    EXPECT_THROW(parse_scenario("{ not json"), ScenarioError);
    EXPECT_THROW(parse_scenario("[]"), ScenarioError);
    EXPECT_THROW(load_scenario("/nonexistent/file.json"), ScenarioError);
}

TEST(Scenario, SerializationRoundTrip)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = gen::random_scenario(seed, {.kill_at_ms = 10000});
        const auto text = scenario_to_json(s);
        EXPECT_EQ(scenario_to_json(parse_scenario(text)), text);
    }
}

TEST(Scenario, ShippedScenariosValidate)
{
    for (const auto& entry : std::filesystem::directory_iterator(LORASTREAM_SCENARIOS)) {
        if (entry.path().extension() == ".json") {
            EXPECT_NO_THROW(load_scenario(entry.path())) << entry.path();
        }
    }
}

}  // namespace
}  // namespace lorastream
