#include "pixiu/netsim.hpp"

#include <algorithm>
#include <sstream>

namespace pixiu::netsim {

std::optional<FaultBehavior::Type> fault_type_from_string(std::string_view name) {
    using T = FaultBehavior::Type;
    if (name == "tamper_output") return T::TamperOutput;
    if (name == "forge_proof") return T::ForgeProof;
    if (name == "wrong_function") return T::WrongFunction;
    if (name == "skip_dp") return T::SkipDp;
    if (name == "fake_data") return T::FakeData;
    if (name == "replay_sealed") return T::ReplaySealed;
    if (name == "eavesdrop_all") return T::EavesdropAll;
    if (name == "none") return T::None;
    return std::nullopt;
}

std::string to_string(FaultBehavior::Type type) {
    using T = FaultBehavior::Type;
    switch (type) {
        case T::None: return "none";
        case T::TamperOutput: return "tamper_output";
        case T::ForgeProof: return "forge_proof";
        case T::WrongFunction: return "wrong_function";
        case T::SkipDp: return "skip_dp";
        case T::FakeData: return "fake_data";
        case T::ReplaySealed: return "replay_sealed";
        case T::EavesdropAll: return "eavesdrop_all";
    }
    return "?";
}

Network::Network(const NetConfig& config) : config_(config), rng_(config.seed ^ 0xa5a5a5a5a5a5a5a5ull) {
    if (config.executor_count == 0)
        throw ConfigError("network.nodes", "at least one executor node required");
    if (config.high_assurance > config.executor_count)
        throw ConfigError("network.high_assurance", "more high-assurance nodes than nodes");

    root_ = std::make_unique<ManufacturerRoot>(rng_);

    uint32_t total = config.executor_count + config.pod_count + 1;
    nodes_.reserve(total);
    for (uint32_t i = 0; i < total; ++i) {
        Node n;
        n.node_id = i;
        n.keypair = KeyPair::from_seed(rng_.array<32>());
        if (i < config.executor_count) {
            n.role = Role::Executor;
            n.security_level = i < config.high_assurance ? SecurityLevel::HighAssurance
                                                         : SecurityLevel::MidLevel;
            n.attack_cost = n.security_level == SecurityLevel::HighAssurance
                                ? config.high_attack_cost
                                : config.mid_attack_cost;
            root_->register_instance(n.keypair.pub, n.security_level);
        } else if (i < config.executor_count + config.pod_count) {
            n.role = Role::Pod;
            n.attack_cost = config.mid_attack_cost;
        } else {
            n.role = Role::Consumer;
            consumer_id_ = i;
        }
        nodes_.push_back(std::move(n));
    }
}

Network spawn_network(const NetConfig& config) {
    return Network(config);
}

Node& Network::node(uint32_t id) {
    if (id >= nodes_.size()) throw ConfigError("node", "no such node " + std::to_string(id));
    return nodes_[id];
}

const Node& Network::node(uint32_t id) const {
    if (id >= nodes_.size()) throw ConfigError("node", "no such node " + std::to_string(id));
    return nodes_[id];
}

Node& Network::node_by_key(const std::string& instance_id) {
    for (Node& n : nodes_)
        if (n.id() == instance_id) return n;
    throw ConfigError("node", "no node with key " + instance_id);
}

std::vector<uint32_t> Network::executor_ids() const {
    std::vector<uint32_t> out;
    for (const Node& n : nodes_)
        if (n.role == Role::Executor) out.push_back(n.node_id);
    return out;
}

std::vector<uint32_t> Network::pod_ids() const {
    std::vector<uint32_t> out;
    for (const Node& n : nodes_)
        if (n.role == Role::Pod) out.push_back(n.node_id);
    return out;
}

InstanceRegistry Network::registry() const {
    InstanceRegistry reg;
    for (const Node& n : nodes_) reg[n.id()] = n.keypair.pub;
    return reg;
}

void Network::inject_fault(uint32_t node_id, FaultBehavior behavior) {
    Node& n = node(node_id);
    if (n.fault.type != FaultBehavior::Type::None && behavior.type != FaultBehavior::Type::None &&
        n.fault.type != behavior.type)
        throw ConflictingBehavior("node " + std::to_string(node_id) +
                                  " already has behavior " + to_string(n.fault.type));
    n.fault = behavior;
}

void Network::send(uint32_t from, uint32_t to, BytesView bytes) {
    Bytes copy(bytes.begin(), bytes.end());
    node(from).observation_log.push_back(copy);
    node(to).observation_log.push_back(copy);
    for (Node& n : nodes_) {
        if (n.node_id == from || n.node_id == to) continue;
        if (n.fault.type == FaultBehavior::Type::EavesdropAll) n.observation_log.push_back(copy);
    }
}

AttackCostReport attack_cost_report(const Network& network, const PipelinePlan& pipeline,
                                    const std::vector<uint32_t>& compromised_nodes) {
    AttackCostReport report;
    std::ostringstream scope;
    bool any = false;
    for (uint32_t id : compromised_nodes) {
        const Node& n = network.node(id);
        report.cost += n.attack_cost;
        for (size_t s = 0; s < pipeline.steps.size(); ++s) {
            if (pipeline.steps[s].instance_id == n.id()) {
                if (any) scope << "; ";
                scope << "step " << s << " (" << kind_token(pipeline.steps[s].kind)
                      << ") plaintext slice";
                any = true;
            }
        }
    }
    report.leaked_scope = any ? scope.str() : "";
    return report;
}

}  // namespace pixiu::netsim
