#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pixiu/crypto.hpp"
#include "pixiu/plan.hpp"

namespace pixiu::netsim {

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(field_path + ": " + what), field(std::move(field_path)) {}
};

struct ConflictingBehavior : std::runtime_error {
    explicit ConflictingBehavior(const std::string& what) : std::runtime_error(what) {}
};

enum class Role : uint8_t { Executor = 0, Pod = 1, Consumer = 2 };

struct FaultBehavior {
    enum class Type : uint8_t {
        None = 0,
        TamperOutput,   // flip bytes in the sealed output leaving this node
        ForgeProof,     // commit a mutated proof line to the public log
        WrongFunction,  // swap the lambda function after attestation
        SkipDp,         // replace the DP gate with a pass-through
        FakeData,       // POD corrupts its payload after signing
        ReplaySealed,   // resend the sealed input instead of the output
        EavesdropAll,   // record every wire byte in the network
    };

    Type type = Type::None;
    int step = -1;  // pipeline step the behavior applies to, where relevant
};

std::optional<FaultBehavior::Type> fault_type_from_string(std::string_view name);
std::string to_string(FaultBehavior::Type type);

struct Node {
    uint32_t node_id = 0;
    Role role = Role::Executor;
    KeyPair keypair;
    SecurityLevel security_level = SecurityLevel::MidLevel;
    uint32_t attack_cost = 0;
    FaultBehavior fault;
    bool assigned = false;  // currently hosting a pipeline step

    // Every byte this node's untrusted host observes on the wire.
    std::vector<Bytes> observation_log;

    std::string id() const { return key_id(keypair.pub); }
};

struct NetConfig {
    uint32_t executor_count = 0;
    uint32_t pod_count = 0;
    uint32_t high_assurance = 0;       // executors flagged HighAssurance
    uint32_t mid_attack_cost = 10;     // abstract units
    uint32_t high_attack_cost = 100;
    uint64_t seed = 0;
};

// Deterministic in-process network: node identities and keys derive from the
// seed, messages are routed synchronously, and observation logs capture what
// each host sees.
class Network {
public:
    explicit Network(const NetConfig& config);

    const NetConfig& config() const { return config_; }

    std::vector<Node>& nodes() { return nodes_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    Node& node(uint32_t id);
    const Node& node(uint32_t id) const;
    Node& node_by_key(const std::string& instance_id);

    std::vector<uint32_t> executor_ids() const;
    std::vector<uint32_t> pod_ids() const;
    uint32_t consumer_id() const { return consumer_id_; }

    ManufacturerRoot& root() { return *root_; }
    const ManufacturerRoot& root() const { return *root_; }

    // Public directory of node verification keys.
    InstanceRegistry registry() const;

    void inject_fault(uint32_t node_id, FaultBehavior behavior);

    // Delivers bytes from one host to another; sender, receiver, and every
    // eavesdropping node observe the (sealed) wire bytes.
    void send(uint32_t from, uint32_t to, BytesView bytes);

    DetRng& rng() { return rng_; }

private:
    NetConfig config_;
    DetRng rng_;
    std::vector<Node> nodes_;
    std::unique_ptr<ManufacturerRoot> root_;
    uint32_t consumer_id_ = 0;
};

Network spawn_network(const NetConfig& config);

struct AttackCostReport {
    uint64_t cost = 0;
    std::string leaked_scope;
};

// Economic accounting for compromised nodes: cost is the sum of their attack
// costs; the leaked scope is at most the plaintext each compromised step saw.
AttackCostReport attack_cost_report(const Network& network, const PipelinePlan& pipeline,
                                    const std::vector<uint32_t>& compromised_nodes);

}  // namespace pixiu::netsim
