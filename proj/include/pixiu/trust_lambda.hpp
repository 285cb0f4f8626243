#pragma once

#include <optional>

#include "pixiu/data_prover.hpp"
#include "pixiu/dp_gate.hpp"
#include "pixiu/proof.hpp"
#include "pixiu/taskdsl.hpp"

namespace pixiu {

// What the PODs hand to the first step: one batch of records per POD, in POD
// order. Per-POD batch digests become the lineage leaves.
struct InputPayload {
    std::vector<std::vector<DataRecord>> pod_batches;

    Bytes encode() const;
    static InputPayload decode(BytesView data);

    static Bytes encode_batch(const std::vector<DataRecord>& batch);
};

enum class AggKind : uint8_t { None = 0, Count = 1, Sum = 2, Mean = 3, VecMean = 4 };

// The task state flowing between steps, sealed edge to edge. The DP gate
// strips records and POD identifiers before anything reaches the consumer.
struct StepPayload {
    std::vector<std::pair<DataRecord, AuthTag>> records;
    std::vector<uint8_t> matched;  // per-record predicate results (TaskExec)
    VerdictSummary summary;
    std::vector<Digest> pod_batch_digests;

    AggKind agg = AggKind::None;
    std::optional<Value> result;
    double clip_lo = 0, clip_hi = 0;
    uint64_t contributing = 0;
    std::vector<std::string> contributing_pods;

    // Opaque sealed per-POD deliveries, in POD order (ephemeral key || ct).
    std::vector<Bytes> envelopes;

    bool alleged = false;
    bool dp_applied = false;

    Bytes encode() const;
    static StepPayload decode(BytesView data);
};

// Per-POD delivery envelope, sealed to the POD's key without naming it.
Bytes seal_envelope(DetRng& rng, const PublicKey& pod, const Record& content);
Record open_envelope(const KeyPair& pod, BytesView envelope);

// Function digests for the built-in lambda runtimes. TaskExec instances use
// the digest of the installed task AST instead.
Digest data_prover_fn_digest();
Digest dp_gate_fn_digest(const dp::PrivacyParams& params);
Digest fedavg_fn_digest(const std::string& vec_field, double clip_lo, double clip_hi);
Digest identity_fn_digest();

struct StepFailure : std::runtime_error {
    std::string reason;  // uppercase token recorded in the failure proof
    StepFailure(std::string reason_token, const std::string& what)
        : std::runtime_error(what), reason(std::move(reason_token)) {}
};

struct LambdaConfig {
    LambdaKind kind = LambdaKind::TaskExec;

    // DataProver
    SignerRegistry signers;

    // TaskExec
    taskdsl::ExprPtr task;
    std::string ad_text;
    std::vector<PublicKey> pod_keys;  // participating PODs, in POD order

    // DpGate
    dp::PrivacyParams privacy;
    dp::NoiseSource noise;
    dp::BudgetLedger* ledger = nullptr;

    // Aggregator
    std::string vec_field;
    double clip_lo = 0, clip_hi = 0;

    // Injected fault: run an identity function instead of the real lambda.
    bool identity_fn = false;
};

struct StepOutcome {
    std::optional<SymSealed> sealed_output;  // absent when the step failed
    ExecutionProof proof;

    bool ok() const { return sealed_output.has_value(); }
};

// One simulated enclave: validator, sandbox, and proof generator behind a
// single sealed entry and a single sealed exit.
class LambdaInstance {
public:
    LambdaInstance(KeyPair keypair, SecurityLevel level, LambdaConfig config);

    const std::string& instance_id() const { return id_; }
    const PublicKey& public_key() const { return keypair_.pub; }
    const KeyPair& keypair() const { return keypair_; }
    LambdaKind kind() const { return config_.kind; }
    SecurityLevel security_level() const { return level_; }

    // Measurement reported to attestation; equals the digest of the function
    // this instance will actually run.
    Digest fn_digest() const { return fn_digest_; }

    void install_ingress_key(const SymKey& key) { ingress_ = key; }
    void install_egress_key(const SymKey& key) { egress_ = key; }

    // Post-attestation function swap (fault injection).
    void swap_function(taskdsl::ExprPtr task);
    void make_identity();

    Bytes validate_input(const SymSealed& sealed_input,
                         const std::optional<ExecutionProof>& expected_prev) const;

    Bytes run_sandbox(BytesView input) const;

    ExecutionProof generate_proof(const TaskId& task_id, uint32_t step_index,
                                  const Digest& input_digest, const Digest& output_digest,
                                  const std::optional<ExecutionProof>& prev) const;

    // validate -> sandbox -> seal -> proof. Any failure yields a signed
    // FailureProof with a zeroed output digest.
    StepOutcome execute_step(const TaskId& task_id, uint32_t step_index,
                             const SymSealed& sealed_input,
                             const std::optional<ExecutionProof>& prev);

    // Genesis variant for the first step: each POD seals its own batch under
    // the shared ingress edge key.
    StepOutcome execute_genesis(const TaskId& task_id,
                                const std::vector<SymSealed>& pod_inputs);

private:
    void recompute_fn_digest();

    StepPayload apply_data_prover(BytesView input) const;
    StepPayload apply_task_exec(StepPayload payload, BytesView raw_input) const;
    StepPayload apply_aggregator(StepPayload payload) const;
    StepPayload apply_dp_gate(StepPayload payload) const;

    std::string id_;
    KeyPair keypair_;
    SecurityLevel level_;
    LambdaConfig config_;
    Digest fn_digest_;
    std::optional<SymKey> ingress_, egress_;
};

}  // namespace pixiu
