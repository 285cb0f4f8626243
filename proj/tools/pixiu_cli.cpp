#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pixiu/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyBad = 1;
constexpr int kExitStepFailed = 2;
constexpr int kExitConfig = 3;
constexpr int kExitUnknown = 4;

fs::path resolve_config(const std::string& scenario, const std::string& config) {
    if (!config.empty()) return config;
    if (scenario.empty())
        throw pixiu::netsim::ConfigError("scenario", "need --scenario or --config");
    std::vector<fs::path> candidates;
    if (const char* dir = std::getenv("PIXIU_SCENARIO_DIR"))
        candidates.push_back(fs::path(dir) / (scenario + ".json"));
    candidates.push_back(fs::path("scenarios") / (scenario + ".json"));
#ifdef PIXIU_SCENARIO_DIR
    candidates.push_back(fs::path(PIXIU_SCENARIO_DIR) / (scenario + ".json"));
#endif
    for (const fs::path& p : candidates)
        if (fs::exists(p)) return p;
    throw pixiu::netsim::ConfigError("scenario", "no config found for scenario " + scenario);
}

std::optional<uint64_t> env_seed() {
    const char* s = std::getenv("PIXIU_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw pixiu::netsim::ConfigError("PIXIU_SEED", "not an unsigned integer");
    }
}

// "behavior", "behavior:2", "behavior:pod3", "behavior:node7"
pixiu::FaultSpec parse_fault(const std::string& text) {
    pixiu::FaultSpec f;
    auto colon = text.find(':');
    f.behavior = text.substr(0, colon == std::string::npos ? text.size() : colon);
    if (colon != std::string::npos) {
        std::string target = text.substr(colon + 1);
        try {
            if (target.rfind("pod", 0) == 0)
                f.pod = std::stoi(target.substr(3));
            else if (target.rfind("node", 0) == 0)
                f.node = std::stoi(target.substr(4));
            else
                f.step = std::stoi(target);
        } catch (const std::exception&) {
            throw pixiu::netsim::ConfigError("fault", "bad fault target: " + target);
        }
    }
    return f;
}

int cmd_run(const std::string& scenario, const std::string& config,
            std::optional<uint64_t> seed, const std::string& out_dir, bool as_json,
            bool zero_noise, const std::vector<std::string>& fault_args, bool show_cost) {
    pixiu::ScenarioConfig cfg = pixiu::ScenarioConfig::load(resolve_config(scenario, config));
    if (!seed) seed = env_seed();
    if (seed) cfg.seed = *seed;
    for (const std::string& f : fault_args) cfg.faults.push_back(parse_fault(f));

    pixiu::ScenarioRun run = pixiu::run_scenario(cfg, out_dir, zero_noise);

    if (as_json) {
        json j;
        j["task"] = pixiu::task_id_hex(run.task_id);
        j["log"] = run.log_path.string();
        j["result_file"] = run.result_path.string();
        j["report_file"] = run.report_path.string();
        j["released"] = pixiu::value_to_json(run.result.released_value);
        j["dp_applied"] = run.result.dp_applied;
        if (show_cost) {
            j["attack_cost"] = run.attack_cost;
            j["leaked_scope"] = run.leaked_scope;
        }
        std::cout << j.dump(2) << "\n";
    } else {
        std::ifstream report(run.report_path);
        std::cout << report.rdbuf();
        if (show_cost) {
            std::cout << "attack cost: " << run.attack_cost << "\n";
            if (!run.leaked_scope.empty())
                std::cout << "leaked scope: " << run.leaked_scope << "\n";
        }
    }
    return kExitOk;
}

int cmd_verify(const std::string& log_path, const std::string& task_hex,
               const std::string& plan_path, bool as_json) {
    pixiu::ProofLog log{fs::path(log_path)};
    fs::path plan_file =
        plan_path.empty() ? fs::path(log_path).parent_path() / "plan.json" : fs::path(plan_path);
    std::ifstream in(plan_file);
    if (!in) throw pixiu::netsim::ConfigError("plan", "cannot open " + plan_file.string());
    json pj;
    in >> pj;
    pixiu::PipelinePlan plan = pixiu::PipelinePlan::from_json(pj);

    pixiu::TaskId task = task_hex.empty() ? plan.task_id : pixiu::task_id_from_hex(task_hex);

    // Instance ids are hex verification keys, so the public plan is enough to
    // rebuild the registry.
    pixiu::InstanceRegistry registry;
    for (const pixiu::PlanStep& s : plan.steps)
        if (!s.instance_id.empty())
            registry.emplace(s.instance_id, pixiu::public_key_from_hex(s.instance_id));

    pixiu::VerificationReport report = pixiu::verify_chain(log, task, plan, registry);
    if (as_json)
        std::cout << report.to_json().dump(2) << "\n";
    else
        std::cout << report.render_text();
    return report.all_ok() ? kExitOk : kExitVerifyBad;
}

int cmd_trace(const std::string& log_path, const std::string& digest_hex, bool as_json) {
    pixiu::ProofLog log{fs::path(log_path)};
    pixiu::LineageTree tree = pixiu::trace_lineage(log, pixiu::Digest::from_hex(digest_hex));
    if (as_json)
        std::cout << tree.to_json().dump(2) << "\n";
    else
        std::cout << tree.render_text();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized-executor simulator"};
    app.require_subcommand(1);

    std::string scenario, config, out_dir = "out", log_path, task_hex, digest_hex, plan_path;
    std::optional<uint64_t> seed;
    bool as_json = false, zero_noise = false;
    std::vector<std::string> faults;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", scenario, "scenario name (ads, dpquery, fedavg, survey)");
        cmd->add_option("--config", config, "scenario config file");
        cmd->add_option("--seed", seed, "run seed (overrides PIXIU_SEED and the config)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_flag("--json", as_json, "machine-readable output");
        cmd->add_flag("--zero-noise", zero_noise, "disable DP noise (testing only)");
    };

    CLI::App* run = app.add_subcommand("run", "execute a scenario pipeline");
    add_run_flags(run);

    CLI::App* attack = app.add_subcommand("attack", "execute a scenario with injected faults");
    add_run_flags(attack);
    attack->add_option("--fault", faults,
                       "behavior[:step|:podN|:nodeN], e.g. tamper_output:1 (repeatable)");

    CLI::App* verify = app.add_subcommand("verify", "verify a proof chain against its plan");
    verify->add_option("--log", log_path, "proof log file")->required();
    verify->add_option("--task", task_hex, "task id (hex); defaults to the plan's task");
    verify->add_option("--plan", plan_path, "plan file (default: plan.json next to the log)");
    verify->add_flag("--json", as_json, "machine-readable output");

    CLI::App* trace = app.add_subcommand("trace", "trace a digest back to its input leaves");
    trace->add_option("--log", log_path, "proof log file")->required();
    trace->add_option("--digest", digest_hex, "output digest (hex)")->required();
    trace->add_flag("--json", as_json, "machine-readable output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario, config, seed, out_dir, as_json, zero_noise, {}, false);
        if (attack->parsed())
            return cmd_run(scenario, config, seed, out_dir, as_json, zero_noise, faults, true);
        if (verify->parsed()) return cmd_verify(log_path, task_hex, plan_path, as_json);
        if (trace->parsed()) return cmd_trace(log_path, digest_hex, as_json);
    } catch (const pixiu::StepFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStepFailed;
    } catch (const pixiu::AttestationFailed& e) {
        std::cerr << "error: attestation: " << e.what() << "\n";
        return kExitStepFailed;
    } catch (const pixiu::UnknownTask& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnknown;
    } catch (const pixiu::UnknownDigest& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnknown;
    } catch (const pixiu::netsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const pixiu::MissingDpGate& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const pixiu::taskdsl::SyntaxError& e) {
        std::cerr << "error: task: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStepFailed;
    }
    return kExitOk;
}
