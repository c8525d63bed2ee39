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


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome cli(const std::string& args, const std::string& env = "")
{
    const auto capture = fs::temp_directory_path() / "lorastream_cli_stdout.txt";
    const std::string command = env + " \"" LORASTREAM_CLI "\" " + args + " > \"" + capture.string() + "\" 2>/dev/null";
    const int status = std::system(command.c_str());
    std::ifstream in(capture);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return Outcome{WIFEXITED(status) ? WEXITSTATUS(status) : -1, buffer.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kBaseline = LORASTREAM_SCENARIOS "/baseline.json";

TEST(Cli, ValidateGoodScenario)
{
    const auto r = cli("validate " + kBaseline);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "ok\n");
}

TEST(Cli, ValidateBadScenarioExitsOne)
{
    const auto dir = scratch("lorastream_cli_bad");
    std::ofstream(dir / "bad.json") << R"({"gateways": []})";
    EXPECT_EQ(cli("validate " + (dir / "bad.json").string()).code, 1);
    EXPECT_EQ(cli("validate " + (dir / "missing.json").string()).code, 1);
    EXPECT_EQ(cli("run " + (dir / "bad.json").string() + " --out " + dir.string()).code, 1);
}

TEST(Cli, UsageErrorExitsOne)
{
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("trace somefile").code, 1);
}

TEST(Cli, RunReportAndTrace)
{
    const auto dir = scratch("lorastream_cli_run");
    const auto run = cli("run " + kBaseline + " --seed 3 --out " + dir.string());
    ASSERT_EQ(run.code, 0);
    EXPECT_NE(run.out.find("seed 3"), std::string::npos);
    const auto log = (dir / "events.jsonl").string();

    const auto report = cli("report " + log);
    EXPECT_EQ(report.code, 0);
    std::ifstream written(dir / "report.json");
    std::stringstream expected;
    expected << written.rdbuf();
    EXPECT_EQ(report.out, expected.str());

    const auto trace = cli("trace " + log + " --window-sizes");
    EXPECT_EQ(trace.code, 0);
    EXPECT_EQ(trace.out.rfind("index,start_ms,end_ms,size_ms", 0), 0u);
    fs::remove_all(dir);
}

TEST(Cli, OutputDirectoryFromEnvironment)
{
    const auto dir = scratch("lorastream_cli_env");
    EXPECT_EQ(cli("run " + kBaseline, "LORASTREAM_OUT_DIR=\"" + dir.string() + "\"").code, 0);
    EXPECT_TRUE(fs::exists(dir / "events.jsonl"));
    fs::remove_all(dir);
}

TEST(Cli, MalformedLogExitsOne)
{
    const auto dir = scratch("lorastream_cli_log");
    std::ofstream(dir / "events.jsonl") << "garbage\n";
    EXPECT_EQ(cli("report " + (dir / "events.jsonl").string()).code, 1);
    EXPECT_EQ(cli("report " + (dir / "absent.jsonl").string()).code, 1);
    fs::remove_all(dir);
}

}  // namespace
