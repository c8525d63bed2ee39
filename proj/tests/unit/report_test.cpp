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


#include "lorastream/report.hpp"
#include "lorastream/runner.hpp"
#include "scenario_gen.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace lorastream {
namespace {

using nlohmann::json;

std::vector<json> tiny_log()
{
    const char* text = R"({"ev":"config","t":0,"seed":1,"duration_ms":10000,"watermark_delay_ms":100,"firing_threshold_m":500,"base_composite_window_ms":1000,"checkpoint_interval_windows":5}
{"ev":"gateway","t":0,"id":1,"position":[0,0]}
{"ev":"gateway","t":0,"id":2,"position":[10,0]}
{"ev":"gateway","t":0,"id":3,"position":[0,10]}
{"ev":"device","t":0,"id":7,"class":"C","position":[1,1],"stream":1,"key":"k","quorum":[1,2,3]}
{"ev":"window_open","t":0,"index":0,"start":0,"end":1000,"size":1000}
{"ev":"tx","t":0,"device":7,"fc":0,"key":"k","stream":1,"value":5,"receptions":[[1,3.0,10],[2,2.0,10]]}
{"ev":"tx","t":100,"device":7,"fc":1,"key":"k","stream":1,"value":6,"receptions":[[2,2.0,110]]}
{"ev":"tx","t":200,"device":7,"fc":2,"key":"k","stream":1,"value":7,"receptions":[[1,2.0,210]]}
{"ev":"tx","t":300,"device":7,"fc":3,"key":"k","stream":1,"value":8,"receptions":[]}
{"ev":"verdict","t":1100,"device":7,"fc":1,"method":"sequence-gap"}
{"ev":"verdict","t":1100,"device":7,"fc":1,"method":"broadcast-reconcile"}
{"ev":"verdict","t":1100,"device":7,"fc":2,"method":"broadcast-reconcile"}
{"ev":"window","t":1100,"index":0,"start":0,"end":1000,"size":1000,"messages":2,"late":0,"latency":10,"branch":"shrunk","next_size":500}
{"ev":"run_end","t":10000,"epoch":0,"unpublished":0}
)";
    return parse_event_log(text);
}

TEST(Report, ScoresAgainstLogGroundTruth)
{
    const auto r = build_report(tiny_log());
    EXPECT_EQ(r.transmissions, 4u);
    EXPECT_EQ(r.primary_path_drops, 2u);  // fc 1 and fc 3 never reached gateway 1

    const auto& gap = r.detection.at("sequence-gap");
    EXPECT_EQ(gap.verdicts, 1u);
    EXPECT_EQ(gap.true_positives, 1u);
    EXPECT_EQ(gap.eligible, 1u);  // fc 3 has no later frame
    EXPECT_DOUBLE_EQ(*gap.precision, 1.0);
    EXPECT_DOUBLE_EQ(*gap.recall, 1.0);

    const auto& rec = r.detection.at("broadcast-reconcile");
    EXPECT_EQ(rec.verdicts, 2u);
    EXPECT_EQ(rec.true_positives, 1u);
    EXPECT_DOUBLE_EQ(*rec.precision, 0.5);
    EXPECT_EQ(rec.eligible, 1u);  // fc 3 reached no gateway at all

    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].next_size, 500);
}

TEST(Report, TraceCsv)
{
    const auto csv = window_trace_csv(build_report(tiny_log()));
    std::istringstream in(csv);
    std::string header;
    std::string row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "index,start_ms,end_ms,size_ms,messages,late_entries,observed_latency_ms,branch,next_size_ms");
    EXPECT_EQ(row, "0,0,1000,1000,2,0,10,shrunk,500");
}

TEST(Report, OfflineRecomputationMatchesLive)
{
    const auto dir = std::filesystem::temp_directory_path() / "lorastream_report_test";
    std::filesystem::remove_all(dir);
    const auto live = run_scenario(gen::random_scenario(21, {.drop_probability = 0.2, .kill_at_ms = 20000}), {.out_dir = dir});
    const auto offline = build_report(read_event_log(dir / "events.jsonl"));
    std::ifstream in(dir / "report.json");
    const auto written = json::parse(in);
    EXPECT_EQ(offline.to_json(), live.report.to_json());
    EXPECT_EQ(written, live.report.to_json());
    std::filesystem::remove_all(dir);
}

TEST(Report, RatiosStayInUnitInterval)
{
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
        const auto r = run_scenario(gen::random_scenario(seed, {.drop_probability = 0.3})).report;
        for (const auto& [method, score] : r.detection) {
            for (const auto& ratio : {score.precision, score.recall}) {
                if (ratio) {
                    EXPECT_GE(*ratio, 0.0) << method;
                    EXPECT_LE(*ratio, 1.0) << method;
                }
            }
        }
    }
}

TEST(EventLog, RejectsMalformedLine)
{
    EXPECT_THROW(parse_event_log("{\"ev\":\"x\",\"t\":0}\nnot json\n"), std::runtime_error);
}

}  // namespace
}  // namespace lorastream
