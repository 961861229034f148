#include <csignal>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gridloop/report.hpp"
#include "gridloop/runner.hpp"
#include "gridloop/scenario.hpp"
#include "gridloop/tcp.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

int print_verdicts(const std::vector<gridloop::orch::Verdict>& verdicts) {
    for (const auto& v : verdicts) {
        const char* tag = v.informational ? "note" : (v.pass ? "PASS" : "FAIL");
        std::printf("%s %s: %s\n", tag, v.name.c_str(), v.detail.c_str());
    }
    bool ok = gridloop::orch::all_pass(verdicts);
    std::printf("acceptance: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    using namespace gridloop;

    CLI::App app{"gridloop - software-in-the-loop microgrid experiment harness"};
    app.require_subcommand(1);

    std::string scenario_path, mode_override, out_override, hub_override;
    std::uint64_t seed_override = 0;

    auto* cmd_run = app.add_subcommand("run", "execute a scenario end to end");
    cmd_run->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd_run->add_option("--mode", mode_override, "virtual|realtime (overrides the file)");
    cmd_run->add_option("--seed", seed_override, "master seed (overrides the file)");
    cmd_run->add_option("--out", out_override, "output directory (overrides the file)");

    auto* cmd_hub = app.add_subcommand("hub", "serve a standalone whiteboard hub");
    std::string listen_addr = "127.0.0.1:7781";
    cmd_hub->add_option("--listen", listen_addr, "host:port to listen on");

    auto* cmd_gw = app.add_subcommand("gateway", "run the telemetry gateway component");
    cmd_gw->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd_gw->add_option("--hub", hub_override, "hub host:port (overrides the file)");

    auto* cmd_sim = app.add_subcommand("sim", "run the microgrid simulator component");
    cmd_sim->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd_sim->add_option("--hub", hub_override, "hub host:port (overrides the file)");

    auto* cmd_agents = app.add_subcommand("agents", "run the control agent fleet");
    cmd_agents->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd_agents->add_option("--hub", hub_override, "hub host:port (overrides the file)");

    auto* cmd_check = app.add_subcommand("check", "re-verify a finished run directory");
    std::string result_dir;
    cmd_check->add_option("--result", result_dir, "output directory of a previous run")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_hub) {
            hub::TcpHubServer server(listen_addr);
            server.start();
            std::printf("hub listening on %s:%d\n",
                        hub::split_host_port(listen_addr).first.c_str(), server.port());
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return 0;
        }

        if (*cmd_check) return print_verdicts(orch::check_result_dir(result_dir));

        orch::Scenario s = orch::load_scenario_file(scenario_path);
        if (!mode_override.empty()) {
            if (mode_override == "virtual")
                s.mode = orch::RunMode::virtual_time;
            else if (mode_override == "realtime")
                s.mode = orch::RunMode::realtime;
            else
                throw std::invalid_argument("--mode must be virtual or realtime");
        }
        if (cmd_run->count("--seed") > 0) s.seed = seed_override;
        if (!out_override.empty()) s.out_dir = out_override;
        if (!hub_override.empty()) s.hub_addr = hub_override;

        if (*cmd_gw) {
            orch::gateway_main(s, s.hub_addr);
            return 0;
        }
        if (*cmd_sim) {
            orch::sim_main(s, s.hub_addr);
            return 0;
        }
        if (*cmd_agents) {
            orch::agents_main(s, s.hub_addr);
            return 0;
        }

        orch::RunResult result = orch::run_scenario(s);
        result.verdicts = orch::check_acceptance(result);
        orch::emit_report(result, s.out_dir);
        std::printf("run finished: %zu trace rows, %zu consensus cycles, wall %s s\n",
                    result.trace.size(), result.cycles.size(),
                    format_double(result.wall_seconds).c_str());
        std::printf("report written to %s\n", s.out_dir.c_str());
        return print_verdicts(result.verdicts);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gridloop: %s\n", e.what());
        return 2;
    }
}
