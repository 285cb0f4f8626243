#include "pixiu/dexec.hpp"

#include <algorithm>

#include "pixiu/codec.hpp"

namespace pixiu {

using netsim::FaultBehavior;
using netsim::Network;
using netsim::Node;
using netsim::Role;

PipelinePlan plan_pipeline(const TaskSpec& spec) {
    PipelinePlan plan;
    plan.task_id = spec.task_id;

    PlanStep prover;
    prover.kind = LambdaKind::DataProver;
    prover.expected_fn_digest = data_prover_fn_digest();
    plan.steps.push_back(prover);

    if (spec.builtin == BuiltinTask::FedAvg) {
        if (!(spec.clip_lo < spec.clip_hi))
            throw MissingDpGate("aggregation without clip bounds has unknowable sensitivity");
        PlanStep agg;
        agg.kind = LambdaKind::Aggregator;
        agg.expected_fn_digest = fedavg_fn_digest(spec.vec_field, spec.clip_lo, spec.clip_hi);
        plan.steps.push_back(agg);
    } else {
        taskdsl::ExprPtr expr = taskdsl::parse(spec.code);
        if (spec.require_dp && taskdsl::is_aggregate(expr)) {
            using taskdsl::Expr;
            if (expr->kind != Expr::Kind::Count && expr->kind != Expr::Kind::Sum &&
                expr->kind != Expr::Kind::Mean)
                throw MissingDpGate(
                    "aggregate composed below the root has no releasable sensitivity");
        }
        PlanStep exec;
        exec.kind = LambdaKind::TaskExec;
        exec.expected_fn_digest = taskdsl::fn_digest(expr);
        plan.steps.push_back(exec);
    }

    if (spec.require_dp) {
        PlanStep gate;
        gate.kind = LambdaKind::DpGate;
        gate.expected_fn_digest = dp_gate_fn_digest(spec.privacy);
        plan.steps.push_back(gate);
    }
    return plan;
}

PipelinePlan recruit_instances(const PipelinePlan& plan, const TaskSpec& spec,
                               Network& network) {
    PipelinePlan assigned = plan;
    auto is_high_importance = [&](LambdaKind kind) {
        return std::find(spec.high_importance.begin(), spec.high_importance.end(), kind) !=
               spec.high_importance.end();
    };

    auto pick = [&](LambdaKind kind) -> Node& {
        Node* fallback = nullptr;
        bool want_high = is_high_importance(kind);
        for (Node& n : network.nodes()) {
            if (n.role != Role::Executor || n.assigned) continue;
            bool high = n.security_level == SecurityLevel::HighAssurance;
            if (high == want_high) return n;
            if (!fallback) fallback = &n;
        }
        if (fallback) return *fallback;
        throw InsufficientNodes("no idle node for " + kind_token(kind));
    };

    for (PlanStep& step : assigned.steps) {
        Node& n = pick(step.kind);
        n.assigned = true;
        step.instance_id = n.id();
    }
    return assigned;
}

PipelineRuntime::PipelineRuntime(Network& network, const TaskSpec& spec,
                                 const PipelinePlan& plan, const SignerRegistry& signers,
                                 const std::vector<PodData>& pods, dp::BudgetLedger* ledger,
                                 dp::NoiseSource noise)
    : network_(network), spec_(spec), plan_(plan) {
    std::vector<PublicKey> pod_keys;
    for (const PodData& p : pods) pod_keys.push_back(network.node(p.node_id).keypair.pub);

    for (size_t s = 0; s < plan_.steps.size(); ++s) {
        const PlanStep& step = plan_.steps[s];
        Node& node = network_.node_by_key(step.instance_id);
        step_nodes_.push_back(node.node_id);

        LambdaConfig cfg;
        cfg.kind = step.kind;
        switch (step.kind) {
            case LambdaKind::DataProver:
                cfg.signers = signers;
                break;
            case LambdaKind::TaskExec: {
                cfg.ad_text = spec.ad_text;
                cfg.pod_keys = pod_keys;
                break;
            }
            case LambdaKind::DpGate:
                cfg.privacy = spec.privacy;
                cfg.noise = noise;
                cfg.ledger = ledger;
                break;
            case LambdaKind::Aggregator:
                cfg.vec_field = spec.vec_field;
                cfg.clip_lo = spec.clip_lo;
                cfg.clip_hi = spec.clip_hi;
                break;
        }
        auto instance =
            std::make_unique<LambdaInstance>(node.keypair, node.security_level, std::move(cfg));

        if (step.kind == LambdaKind::TaskExec) {
            // The task source travels sealed to the TaskExec instance only;
            // every other host sees ciphertext.
            SealedBlob code_blob =
                seal_to(network_.rng(), node.keypair.pub, to_bytes(spec.code));
            network_.send(network_.consumer_id(), node.node_id, code_blob.encode());
            Bytes source = unseal(node.keypair, code_blob);
            instance->swap_function(taskdsl::parse(to_string(source)));
        }
        instances_.push_back(std::move(instance));
    }
}

void PipelineRuntime::apply_post_attestation_faults() {
    if (faults_applied_) return;
    faults_applied_ = true;
    for (size_t s = 0; s < instances_.size(); ++s) {
        const FaultBehavior& fault = network_.node(step_nodes_[s]).fault;
        if (fault.type == FaultBehavior::Type::WrongFunction &&
            fault.step == static_cast<int>(s)) {
            if (plan_.steps[s].kind == LambdaKind::TaskExec)
                instances_[s]->swap_function(taskdsl::parse("true"));
            else
                instances_[s]->make_identity();
        }
        if (fault.type == FaultBehavior::Type::SkipDp &&
            plan_.steps[s].kind == LambdaKind::DpGate) {
            instances_[s]->make_identity();
        }
    }
}

KeyChain PipelineRuntime::owner_attest_and_keygen(const std::vector<PodData>& pods) {
    if (pods.empty()) throw netsim::ConfigError("pods", "task needs at least one POD");
    uint32_t owner = pods.front().node_id;

    // Attest every instance before releasing a single key.
    for (size_t s = 0; s < instances_.size(); ++s) {
        AttestationReport report =
            network_.root().attest(instances_[s]->instance_id(), instances_[s]->fn_digest());
        network_.send(step_nodes_[s], owner, report.signed_body());
        if (!network_.root().check(report, plan_.steps[s].expected_fn_digest))
            throw AttestationFailed(instances_[s]->instance_id(),
                                    "measurement mismatch at step " + std::to_string(s));
    }

    KeyChain chain;
    for (size_t i = 0; i < plan_.edge_count(); ++i) chain.keys.push_back(network_.rng().array<32>());

    // Edge key i goes to exactly the two endpoints of edge i, sealed to each.
    auto deliver = [&](const SymKey& key, uint32_t node_id, const PublicKey& pk) {
        SealedBlob blob = seal_to(network_.rng(), pk, BytesView(key.data(), key.size()));
        network_.send(owner, node_id, blob.encode());
    };

    for (size_t s = 0; s < instances_.size(); ++s) {
        const Node& node = network_.node(step_nodes_[s]);
        deliver(chain.keys[s], node.node_id, node.keypair.pub);
        deliver(chain.keys[s + 1], node.node_id, node.keypair.pub);
        instances_[s]->install_ingress_key(chain.keys[s]);
        instances_[s]->install_egress_key(chain.keys[s + 1]);
    }
    for (const PodData& p : pods) {
        const Node& pod_node = network_.node(p.node_id);
        deliver(chain.keys.front(), pod_node.node_id, pod_node.keypair.pub);
    }
    const Node& consumer = network_.node(network_.consumer_id());
    deliver(chain.keys.back(), consumer.node_id, consumer.keypair.pub);
    return chain;
}

namespace {

std::optional<ExecutionProof> last_logged_proof(const ProofLog& log, const TaskId& task_id) {
    std::string id_hex = task_id_hex(task_id);
    for (auto it = log.lines().rbegin(); it != log.lines().rend(); ++it) {
        if (it->compare(0, id_hex.size(), id_hex) != 0) continue;
        try {
            return ExecutionProof::parse_line(*it);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// A host under ForgeProof or TamperOutput writes its own line to the public
// storage instead of the honest proof.
void commit_proof(ProofLog& log, Network& network, const ExecutionProof& proof, size_t step,
                  uint32_t node_id) {
    const FaultBehavior& fault = network.node(node_id).fault;
    if (fault.type == FaultBehavior::Type::TamperOutput &&
        fault.step == static_cast<int>(step)) {
        // Flip one output-digest bit in the committed line; the stale
        // signature no longer covers the bytes.
        ExecutionProof mutated = proof;
        mutated.output_digest.bytes[0] ^= 0x01;
        log.raw_append_line(mutated.render_line());
        return;
    }
    if (fault.type == FaultBehavior::Type::ForgeProof &&
        fault.step == static_cast<int>(step)) {
        // Fabricated proof signed by an attacker key unknown to the registry.
        KeyPair attacker = KeyPair::from_seed(network.rng().array<32>());
        ExecutionProof forged =
            make_proof(attacker, proof.task_id, proof.step_index, proof.kind, proof.input_digest,
                       proof.fn_digest, sha256(to_bytes("forged")), proof.prev_proof_digest);
        log.raw_append_line(forged.render_line());
        return;
    }
    log.append(proof, network.registry());
}

}  // namespace

TaskResult PipelineRuntime::run_pipeline(const KeyChain& keychain,
                                         const std::vector<PodData>& pods, ProofLog& log) {
    apply_post_attestation_faults();

    const size_t n_steps = plan_.steps.size();
    const uint32_t consumer_node = network_.consumer_id();
    const Node& consumer = network_.node(consumer_node);

    auto consumer_complaint = [&](const std::string& reason) {
        ExecutionProof complaint = make_proof(
            consumer.keypair, spec_.task_id, static_cast<uint32_t>(n_steps),
            plan_.steps.back().kind, Digest::zero(), Digest::zero(), Digest::zero(),
            last_logged_proof(log, spec_.task_id)
                ? last_logged_proof(log, spec_.task_id)->proof_digest()
                : Digest::zero(),
            reason);
        log.append(complaint, network_.registry());
    };

    // PODs seal their batches under the shared ingress edge key. A POD under
    // FakeData corrupts a payload after signing it.
    std::vector<SymSealed> pod_blobs;
    std::vector<Digest> pod_digests;
    for (const PodData& pod : pods) {
        std::vector<DataRecord> batch = pod.records;
        const FaultBehavior& fault = network_.node(pod.node_id).fault;
        if (fault.type == FaultBehavior::Type::FakeData && !batch.empty())
            batch.front().payload["__tampered"] = Value(true);
        Bytes batch_bytes = InputPayload::encode_batch(batch);
        pod_digests.push_back(sha256(batch_bytes));
        SymSealed blob = sym_seal(network_.rng(), keychain.keys.front(), batch_bytes);
        network_.send(pod.node_id, step_nodes_.front(), blob.encode());
        pod_blobs.push_back(std::move(blob));
    }

    SymSealed current;
    std::optional<ExecutionProof> prev;
    for (size_t s = 0; s < n_steps; ++s) {
        LambdaInstance& inst = *instances_[s];
        StepOutcome outcome = s == 0 ? inst.execute_genesis(spec_.task_id, pod_blobs)
                                     : inst.execute_step(spec_.task_id, static_cast<uint32_t>(s),
                                                         current, prev);
        commit_proof(log, network_, outcome.proof, s, step_nodes_[s]);
        if (!outcome.ok()) throw StepFailed(static_cast<uint32_t>(s), outcome.proof.failure_reason
                                                                          ? *outcome.proof.failure_reason
                                                                          : "STEPFAILURE");

        // Host-side forwarding, where a compromised host can tamper or replay.
        SymSealed outgoing = *outcome.sealed_output;
        const FaultBehavior& fault = network_.node(step_nodes_[s]).fault;
        if (fault.type == FaultBehavior::Type::TamperOutput &&
            fault.step == static_cast<int>(s) && !outgoing.ciphertext.empty()) {
            outgoing.ciphertext[outgoing.ciphertext.size() / 2] ^= 0x40;
        }
        if (fault.type == FaultBehavior::Type::ReplaySealed &&
            fault.step == static_cast<int>(s)) {
            outgoing = s == 0 ? pod_blobs.front() : current;
        }

        uint32_t next_node = s + 1 < n_steps ? step_nodes_[s + 1] : consumer_node;
        network_.send(step_nodes_[s], next_node, outgoing.encode());
        current = std::move(outgoing);
        prev = last_logged_proof(log, spec_.task_id);
    }

    // Consumer side: unseal with the egress edge key, then verify the public
    // chain before accepting anything.
    Bytes final_plain;
    try {
        final_plain = sym_unseal(keychain.keys.back(), current);
    } catch (const AuthFailure&) {
        consumer_complaint("AUTHFAILURE");
        throw StepFailed(static_cast<uint32_t>(n_steps), "AUTHFAILURE");
    }

    VerificationReport report = verify_chain(log, spec_.task_id, plan_, network_.registry());
    if (!report.all_ok()) {
        consumer_complaint("CHAINVERIFY");
        throw StepFailed(*report.first_bad_step, "CHAINVERIFY");
    }

    StepPayload payload;
    try {
        payload = StepPayload::decode(final_plain);
    } catch (const DecodeError&) {
        consumer_complaint("DECODEERROR");
        throw StepFailed(static_cast<uint32_t>(n_steps), "DECODEERROR");
    }
    if (spec_.require_dp && !payload.dp_applied) {
        consumer_complaint("RAWRELEASE");
        throw StepFailed(static_cast<uint32_t>(n_steps), "RAWRELEASE");
    }

    // Deliver sealed envelopes back to the PODs, positionally.
    for (size_t i = 0; i < payload.envelopes.size() && i < pods.size(); ++i)
        network_.send(consumer_node, pods[i].node_id, payload.envelopes[i]);

    ProofLog::LeavesEntry leaves;
    leaves.pod_batch_digests = pod_digests;
    leaves.auth_summary = payload.summary;
    log.record_leaves(spec_.task_id, leaves);

    TaskResult result;
    result.released_value = payload.result.value_or(Value(false));
    result.auth_summary = payload.summary;
    result.proof_head = prev ? prev->proof_digest() : Digest::zero();
    result.result_digest = prev ? prev->output_digest : Digest::zero();
    result.alleged_flag = payload.alleged;
    result.dp_applied = payload.dp_applied;
    result.envelopes = payload.envelopes;
    result.pod_batch_digests = pod_digests;
    return result;
}

TaskResult execute_task(Network& network, const TaskSpec& spec, const SignerRegistry& signers,
                        const std::vector<PodData>& pods, ProofLog& log,
                        dp::BudgetLedger* ledger, dp::NoiseSource noise,
                        PipelinePlan* plan_out) {
    PipelinePlan plan = plan_pipeline(spec);
    PipelinePlan assigned = recruit_instances(plan, spec, network);
    if (plan_out) *plan_out = assigned;

    struct Release {
        Network& net;
        PipelinePlan& plan;
        ~Release() {
            for (PlanStep& s : plan.steps)
                try {
                    net.node_by_key(s.instance_id).assigned = false;
                } catch (...) {
                }
        }
    } release{network, assigned};

    PipelineRuntime runtime(network, spec, assigned, signers, pods, ledger, std::move(noise));
    KeyChain chain = runtime.owner_attest_and_keygen(pods);
    return runtime.run_pipeline(chain, pods, log);
}

}  // namespace pixiu
