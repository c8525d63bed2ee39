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
#include "lorastream/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kBreach = 2;

std::filesystem::path output_dir(const std::string& flag)
{
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("LORASTREAM_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "out";
}

int run(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out_flag)
{
    const auto scenario = lorastream::load_scenario(scenario_path);
    lorastream::RunOptions options;
    options.seed = seed;
    options.out_dir = output_dir(out_flag);
    const auto result = lorastream::run_scenario(scenario, options);
    const auto& r = result.report;
    std::cout << "seed " << result.seed << ": " << r.transmissions << " transmissions, " << r.committed_outputs
              << " outputs, " << r.windows.size() << " windows, epoch " << result.final_epoch << ", "
              << r.failovers << " failovers -> " << options.out_dir->string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LoRaWAN stream-join simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_flag;
    std::optional<std::uint64_t> seed;
    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write events, outputs and a report");
    run_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run_cmd->add_option("--seed", seed, "Override the scenario seed");
    run_cmd->add_option("--out", out_flag, "Output directory (default: $LORASTREAM_OUT_DIR or ./out)");

    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
    validate_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();

    std::string log_path;
    auto* report_cmd = app.add_subcommand("report", "Rebuild the run report from an event log");
    report_cmd->add_option("event_log", log_path, "events.jsonl")->required();

    bool window_sizes = false;
    auto* trace_cmd = app.add_subcommand("trace", "Print traces recorded in an event log");
    trace_cmd->add_option("event_log", log_path, "events.jsonl")->required();
    trace_cmd->add_flag("--window-sizes", window_sizes, "Window size per window as CSV")->required();

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    }

    try {
        if (run_cmd->parsed()) {
            return run(scenario_path, seed, out_flag);
        }
        if (validate_cmd->parsed()) {
            lorastream::load_scenario(scenario_path);
            std::cout << "ok\n";
            return kOk;
        }
        if (report_cmd->parsed() || trace_cmd->parsed()) {
            lorastream::RunReport report;
            try {
                report = lorastream::build_report(lorastream::read_event_log(log_path));
            }
            catch (const nlohmann::json::exception& e) {
                std::cerr << "malformed event log: " << e.what() << "\n";
                return kInvalid;
            }
            catch (const std::runtime_error& e) {
                std::cerr << "unreadable event log: " << e.what() << "\n";
                return kInvalid;
            }
            if (report_cmd->parsed()) {
                std::cout << report.to_json().dump(2) << "\n";
            }
            else {
                std::cout << lorastream::window_trace_csv(report);
            }
            return kOk;
        }
    }
    catch (const lorastream::ScenarioError& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return kInvalid;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBreach;
    }
    return kInvalid;
}
