#include "pixiu/scenario.hpp"

#include <fstream>

#include "json.hpp"
#include "pixiu/codec.hpp"

namespace pixiu {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load_json_file(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw netsim::ConfigError(what, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw netsim::ConfigError(what, e.what());
    }
    return j;
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "hw" || s == "hardware") return SourceKind::HardwareSigned;
    if (s == "org") return SourceKind::OrgSigned;
    if (s == "alleged") return SourceKind::Alleged;
    throw netsim::ConfigError("source", "unknown source kind: " + s);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace

ScenarioConfig ScenarioConfig::load(const fs::path& config_path) {
    json j = load_json_file(config_path, "config");
    ScenarioConfig cfg;
    try {
        cfg.name = j.at("name").get<std::string>();
        cfg.seed = j.value("seed", uint64_t{0});

        if (j.contains("network")) {
            const json& n = j["network"];
            cfg.executor_count = n.value("executors", cfg.executor_count);
            cfg.pod_count = n.value("pods", cfg.pod_count);
            cfg.high_assurance = n.value("high_assurance", cfg.high_assurance);
            cfg.mid_attack_cost = n.value("mid_attack_cost", cfg.mid_attack_cost);
            cfg.high_attack_cost = n.value("high_attack_cost", cfg.high_attack_cost);
        }

        const json& t = j.at("task");
        cfg.code = t.value("code", std::string());
        cfg.builtin = t.value("builtin", std::string());
        cfg.vec_field = t.value("vec_field", cfg.vec_field);
        cfg.clip_lo = t.value("clip_lo", 0.0);
        cfg.clip_hi = t.value("clip_hi", 0.0);
        cfg.ad_text = t.value("ad_text", std::string());
        cfg.epsilon = t.value("epsilon", 1.0);
        cfg.require_dp = t.value("require_dp", true);
        for (const auto& k : t.value("high_importance", std::vector<std::string>{}))
            cfg.high_importance.push_back(k);

        cfg.pod_budget = j.value("budget", json::object()).value("per_pod", 0.0);
        cfg.data_file = config_path.parent_path() / j.at("data").get<std::string>();
        for (const auto& s : j.value("signers", std::vector<std::string>{}))
            cfg.signer_names.push_back(s);

        for (const json& f : j.value("faults", json::array())) {
            FaultSpec spec;
            spec.behavior = f.at("behavior").get<std::string>();
            spec.step = f.value("step", -1);
            spec.pod = f.value("pod", -1);
            spec.node = f.value("node", -1);
            cfg.faults.push_back(spec);
        }
    } catch (const json::exception& e) {
        throw netsim::ConfigError("config", e.what());
    }

    if (cfg.code.empty() && cfg.builtin.empty())
        throw netsim::ConfigError("task.code", "either a task or a builtin is required");
    if (!cfg.builtin.empty() && cfg.builtin != "fedavg")
        throw netsim::ConfigError("task.builtin", "unknown builtin: " + cfg.builtin);
    if (cfg.epsilon <= 0)
        throw netsim::ConfigError("task.epsilon", "epsilon must be positive");
    return cfg;
}

std::map<std::string, KeyPair> derive_signers(const std::vector<std::string>& names,
                                              uint64_t seed) {
    std::map<std::string, KeyPair> out;
    for (const std::string& name : names) {
        Encoder enc;
        enc.str("signer");
        enc.str(name);
        enc.u64(seed);
        out.emplace(name, KeyPair::from_seed(sha256(enc.data()).bytes));
    }
    return out;
}

FixtureData load_fixture(const fs::path& data_file,
                         const std::map<std::string, KeyPair>& signers) {
    std::ifstream in(data_file);
    if (!in) throw netsim::ConfigError("data", "cannot open " + data_file.string());

    FixtureData fixture;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw netsim::ConfigError("data", data_file.filename().string() + ":" +
                                                  std::to_string(line_no) + ": " + e.what());
        }
        size_t pod = j.at("pod").get<size_t>();
        if (pod >= fixture.batches.size()) fixture.batches.resize(pod + 1);

        DataRecord rec;
        rec.source_kind = source_kind_from_string(j.value("source", "alleged"));
        const json& record = j.at("record");
        if (!record.is_object())
            throw netsim::ConfigError("data", "record must be an object of named fields");
        for (auto it = record.begin(); it != record.end(); ++it)
            rec.payload.emplace(it.key(), value_from_json(it.value()));

        if (rec.source_kind != SourceKind::Alleged) {
            std::string signer = j.at("signer").get<std::string>();
            auto key = signers.find(signer);
            if (key == signers.end())
                throw netsim::ConfigError("data", "record signed by unknown signer " + signer);
            rec.signer = signer;
            rec.source_signature = sign_payload(key->second, rec.payload);
            if (j.value("badsig", false)) (*rec.source_signature)[0] ^= 0xff;
        }
        fixture.batches[pod].push_back(std::move(rec));
    }
    return fixture;
}

TaskId derive_task_id(const std::string& name, uint64_t seed) {
    Encoder enc;
    enc.str("task");
    enc.str(name);
    enc.u64(seed);
    Digest d = sha256(enc.data());
    TaskId id{};
    std::copy(d.bytes.begin(), d.bytes.begin() + id.size(), id.begin());
    return id;
}

ScenarioRun run_scenario(
    const ScenarioConfig& cfg, const fs::path& out_dir, bool zero_noise,
    const std::function<void(netsim::Network&, const PipelinePlan&)>& inspect) {
    fs::create_directories(out_dir);
    fs::path log_path = out_dir / "proofs.log";
    fs::remove(log_path);
    fs::remove(out_dir / "proofs.log.leaves");

    netsim::NetConfig ncfg;
    ncfg.executor_count = cfg.executor_count;
    ncfg.pod_count = cfg.pod_count;
    ncfg.high_assurance = cfg.high_assurance;
    ncfg.mid_attack_cost = cfg.mid_attack_cost;
    ncfg.high_attack_cost = cfg.high_attack_cost;
    ncfg.seed = cfg.seed;
    netsim::Network net(ncfg);

    auto signer_keys = derive_signers(cfg.signer_names, cfg.seed);
    SignerRegistry signer_registry;
    for (const auto& [name, kp] : signer_keys) signer_registry.emplace(name, kp.pub);

    FixtureData fixture = load_fixture(cfg.data_file, signer_keys);
    std::vector<uint32_t> pod_nodes = net.pod_ids();
    if (fixture.batches.size() > pod_nodes.size())
        throw netsim::ConfigError("network.pods",
                                  "fixture references POD " +
                                      std::to_string(fixture.batches.size() - 1) +
                                      " but only " + std::to_string(pod_nodes.size()) +
                                      " POD nodes exist");

    std::vector<PodData> pods;
    for (size_t i = 0; i < fixture.batches.size(); ++i) {
        if (fixture.batches[i].empty()) continue;
        PodData pod;
        pod.node_id = pod_nodes[i];
        pod.records = fixture.batches[i];
        std::string pod_key = net.node(pod.node_id).id();
        for (DataRecord& rec : pod.records) rec.pod_id = pod_key;
        pods.push_back(std::move(pod));
    }
    if (pods.empty()) throw netsim::ConfigError("data", "no records in fixture");

    auto ledger = std::make_unique<dp::BudgetLedger>();
    if (cfg.pod_budget > 0)
        for (const PodData& p : pods)
            ledger->set_initial(net.node(p.node_id).id(), cfg.pod_budget);

    TaskSpec spec;
    spec.task_id = derive_task_id(cfg.name, cfg.seed);
    spec.consumer = net.node(net.consumer_id()).id();
    spec.code = cfg.code;
    spec.builtin = cfg.builtin == "fedavg" ? BuiltinTask::FedAvg : BuiltinTask::None;
    spec.vec_field = cfg.vec_field;
    spec.clip_lo = cfg.clip_lo;
    spec.clip_hi = cfg.clip_hi;
    spec.ad_text = cfg.ad_text;
    spec.privacy = dp::PrivacyParams{cfg.epsilon, 1.0};
    spec.require_dp = cfg.require_dp;
    for (const std::string& token : cfg.high_importance) {
        auto kind = kind_from_token(token);
        if (!kind)
            throw netsim::ConfigError("task.high_importance", "unknown kind token " + token);
        spec.high_importance.push_back(*kind);
    }

    PipelinePlan plan = plan_pipeline(spec);
    PipelinePlan assigned = recruit_instances(plan, spec, net);

    write_text(out_dir / "plan.json", assigned.to_json().dump(2) + "\n");

    std::vector<uint32_t> compromised;
    for (const FaultSpec& f : cfg.faults) {
        auto type = netsim::fault_type_from_string(f.behavior);
        if (!type)
            throw netsim::ConfigError("faults.behavior", "unknown behavior " + f.behavior);
        netsim::FaultBehavior behavior{*type, f.step};
        if (*type == netsim::FaultBehavior::Type::EavesdropAll && f.node < 0 && f.pod < 0) {
            for (netsim::Node& n : net.nodes())
                if (n.fault.type == netsim::FaultBehavior::Type::None)
                    net.inject_fault(n.node_id, behavior);
            continue;
        }
        uint32_t target;
        if (f.pod >= 0) {
            if (static_cast<size_t>(f.pod) >= pod_nodes.size())
                throw netsim::ConfigError("faults.pod", "POD index out of range");
            target = pod_nodes[f.pod];
        } else if (f.node >= 0) {
            target = static_cast<uint32_t>(f.node);
        } else if (f.step >= 0) {
            if (static_cast<size_t>(f.step) >= assigned.steps.size())
                throw netsim::ConfigError("faults.step", "step index out of range");
            target = net.node_by_key(assigned.steps[f.step].instance_id).node_id;
        } else {
            throw netsim::ConfigError("faults", "fault needs a step, pod, or node target");
        }
        net.inject_fault(target, behavior);
        compromised.push_back(target);
    }

    dp::NoiseSource noise =
        zero_noise ? dp::zero_noise()
                   : dp::seeded_noise(std::make_shared<DetRng>(net.rng().fork()));

    ProofLog log(log_path);
    PipelineRuntime runtime(net, spec, assigned, signer_registry, pods,
                            cfg.pod_budget > 0 ? ledger.get() : nullptr, noise);
    KeyChain chain = runtime.owner_attest_and_keygen(pods);
    TaskResult result = runtime.run_pipeline(chain, pods, log);

    json rj;
    rj["task"] = task_id_hex(spec.task_id);
    rj["scenario"] = cfg.name;
    rj["released"] = value_to_json(result.released_value);
    rj["auth"] = {{"verified", result.auth_summary.verified},
                  {"alleged", result.auth_summary.alleged},
                  {"rejected", result.auth_summary.rejected}};
    rj["alleged"] = result.alleged_flag;
    rj["dp_applied"] = result.dp_applied;
    rj["result_digest"] = result.result_digest.hex();
    rj["proof_head"] = result.proof_head.hex();
    fs::path result_path = out_dir / "result.json";
    write_text(result_path, rj.dump(2) + "\n");

    if (!result.envelopes.empty()) {
        fs::create_directories(out_dir / "inboxes");
        for (size_t i = 0; i < result.envelopes.size(); ++i)
            write_text(out_dir / "inboxes" / ("slot_" + std::to_string(i) + ".env"),
                       hex_encode(result.envelopes[i]) + "\n");
    }

    std::string report;
    report += "scenario: " + cfg.name + "\n";
    report += "task:     " + task_id_hex(spec.task_id) + "\n";
    report += "steps:\n";
    for (size_t s = 0; s < assigned.steps.size(); ++s)
        report += "  " + std::to_string(s) + "  " + kind_token(assigned.steps[s].kind) +
                  "  instance " + assigned.steps[s].instance_id.substr(0, 16) + "...\n";
    report += "released: " + value_to_json(result.released_value).dump() + "\n";
    report += "auth:     verified=" + std::to_string(result.auth_summary.verified) +
              " alleged=" + std::to_string(result.auth_summary.alleged) +
              " rejected=" + std::to_string(result.auth_summary.rejected) + "\n";
    report += std::string("dp:       ") + (result.dp_applied ? "applied" : "not applied") + "\n";
    if (result.alleged_flag)
        report += "note:     result includes alleged (unverifiable) input data\n";
    if (!result.envelopes.empty())
        report += "inboxes:  " + std::to_string(result.envelopes.size()) +
                  " sealed deliveries (recipients unnamed, routed by slot)\n";
    fs::path report_path = out_dir / "report.txt";
    write_text(report_path, report);

    if (inspect) inspect(net, assigned);

    ScenarioRun run;
    run.task_id = spec.task_id;
    run.plan = assigned;
    run.result = result;
    run.log_path = log_path;
    run.result_path = result_path;
    run.report_path = report_path;
    if (!compromised.empty()) {
        auto cost = netsim::attack_cost_report(net, assigned, compromised);
        run.attack_cost = cost.cost;
        run.leaked_scope = cost.leaked_scope;
    }
    return run;
}

}  // namespace pixiu
