#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pixiu/netsim.hpp"
#include "pixiu/proof_log.hpp"
#include "pixiu/trust_lambda.hpp"

namespace pixiu {

enum class BuiltinTask : uint8_t { None = 0, FedAvg = 1 };

struct TaskSpec {
    TaskId task_id{};
    std::string consumer;  // key id

    // Either DSL source or a built-in lambda kind.
    std::string code;
    BuiltinTask builtin = BuiltinTask::None;
    std::string vec_field = "weights";  // FedAvg input field
    double clip_lo = 0, clip_hi = 0;    // FedAvg element clip bounds

    std::string ad_text;  // when set, predicate tasks deliver sealed envelopes

    dp::PrivacyParams privacy;
    bool require_dp = true;

    // Lambda kinds that should land on high-assurance nodes first.
    std::vector<LambdaKind> high_importance;
};

struct MissingDpGate : std::runtime_error {
    explicit MissingDpGate(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientNodes : std::runtime_error {
    explicit InsufficientNodes(const std::string& what) : std::runtime_error(what) {}
};

struct AttestationFailed : std::runtime_error {
    std::string instance_id;
    AttestationFailed(std::string instance, const std::string& what)
        : std::runtime_error(what), instance_id(std::move(instance)) {}
};

struct StepFailed : std::runtime_error {
    uint32_t step_index;
    std::string reason;
    StepFailed(uint32_t index, std::string reason_token)
        : std::runtime_error("step " + std::to_string(index) + " failed: " + reason_token),
          step_index(index), reason(std::move(reason_token)) {}
};

// Canonical lambda order for a task, with expected function digests.
PipelinePlan plan_pipeline(const TaskSpec& spec);

// Assigns one distinct idle executor node per step; high-importance kinds get
// high-assurance nodes first.
PipelinePlan recruit_instances(const PipelinePlan& plan, const TaskSpec& spec,
                               netsim::Network& network);

struct KeyChain {
    // keys[i] protects edge i (into step i); keys[steps] is the consumer edge.
    std::vector<SymKey> keys;
};

struct TaskResult {
    Value released_value;
    VerdictSummary auth_summary;
    Digest proof_head;  // digest of the final proof
    Digest result_digest;  // digest of the released (final plaintext) bytes
    bool alleged_flag = false;
    bool dp_applied = false;
    std::vector<Bytes> envelopes;  // sealed per-POD deliveries, in POD order
    std::vector<Digest> pod_batch_digests;
};

struct PodData {
    uint32_t node_id = 0;
    std::vector<DataRecord> records;
};

// Everything the driver holds for one task: instances keyed by step, the key
// chain, and the runtime fault bookkeeping.
class PipelineRuntime {
public:
    PipelineRuntime(netsim::Network& network, const TaskSpec& spec, const PipelinePlan& plan,
                    const SignerRegistry& signers, const std::vector<PodData>& pods,
                    dp::BudgetLedger* ledger, dp::NoiseSource noise);

    // Owner-side attestation and key distribution. Throws AttestationFailed
    // before any key is released.
    KeyChain owner_attest_and_keygen(const std::vector<PodData>& pods);

    TaskResult run_pipeline(const KeyChain& keychain, const std::vector<PodData>& pods,
                            ProofLog& log);

    LambdaInstance& instance(size_t step) { return *instances_[step]; }
    const PipelinePlan& plan() const { return plan_; }

private:
    void apply_post_attestation_faults();

    netsim::Network& network_;
    const TaskSpec& spec_;
    PipelinePlan plan_;
    std::vector<std::unique_ptr<LambdaInstance>> instances_;
    std::vector<uint32_t> step_nodes_;  // node ids per step
    bool faults_applied_ = false;
};

// Convenience wrapper: plan, recruit, attest, distribute keys, execute.
TaskResult execute_task(netsim::Network& network, const TaskSpec& spec,
                        const SignerRegistry& signers, const std::vector<PodData>& pods,
                        ProofLog& log, dp::BudgetLedger* ledger, dp::NoiseSource noise,
                        PipelinePlan* plan_out = nullptr);

}  // namespace pixiu
