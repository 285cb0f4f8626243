#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pixiu/dexec.hpp"

namespace pixiu {

// One fault to inject before the pipeline runs. Exactly one target applies:
// a POD index, a raw node id, or the node hosting a pipeline step.
struct FaultSpec {
    std::string behavior;
    int step = -1;
    int pod = -1;
    int node = -1;
};

struct ScenarioConfig {
    std::string name;
    uint64_t seed = 0;

    uint32_t executor_count = 6;
    uint32_t pod_count = 100;
    uint32_t high_assurance = 2;
    uint32_t mid_attack_cost = 10;
    uint32_t high_attack_cost = 100;

    std::string code;            // task DSL source; empty when builtin is set
    std::string builtin;         // "" or "fedavg"
    std::string vec_field = "weights";
    double clip_lo = 0, clip_hi = 0;
    std::string ad_text;
    double epsilon = 1.0;
    bool require_dp = true;
    std::vector<std::string> high_importance;  // kind tokens, e.g. "DPGATE"

    double pod_budget = 0;  // per-POD epsilon budget; 0 disables the ledger

    std::filesystem::path data_file;  // resolved against the config location
    std::vector<std::string> signer_names;

    std::vector<FaultSpec> faults;

    static ScenarioConfig load(const std::filesystem::path& config_path);
};

// Fixture records grouped by POD index, signed with the scenario's derived
// signer keys. pod_id fields are filled in later, once node keys exist.
struct FixtureData {
    std::vector<std::vector<DataRecord>> batches;
};

std::map<std::string, KeyPair> derive_signers(const std::vector<std::string>& names,
                                              uint64_t seed);

FixtureData load_fixture(const std::filesystem::path& data_file,
                         const std::map<std::string, KeyPair>& signers);

TaskId derive_task_id(const std::string& name, uint64_t seed);

struct ScenarioRun {
    TaskId task_id{};
    PipelinePlan plan;
    TaskResult result;
    std::filesystem::path log_path;
    std::filesystem::path result_path;
    std::filesystem::path report_path;
    uint64_t attack_cost = 0;        // sum over nodes with injected faults
    std::string leaked_scope;
};

// Full run: spawn network, load data, plan, recruit, inject faults, attest,
// distribute keys, execute, write proofs.log / plan.json / result.json /
// report.txt / inboxes. Throws on config errors and on StepFailed; the proof
// log written so far stays on disk.
ScenarioRun run_scenario(
    const ScenarioConfig& config, const std::filesystem::path& out_dir, bool zero_noise = false,
    const std::function<void(netsim::Network&, const PipelinePlan&)>& inspect = {});

}  // namespace pixiu
