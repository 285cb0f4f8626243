#include "pixiu/trust_lambda.hpp"

#include <algorithm>
#include <cstring>

#include "pixiu/codec.hpp"

namespace pixiu {

// --- payload encodings ---

Bytes InputPayload::encode_batch(const std::vector<DataRecord>& batch) {
    Encoder enc;
    enc.list_count(batch.size());
    for (const DataRecord& r : batch) r.encode_into(enc);
    return enc.take();
}

Bytes InputPayload::encode() const {
    Encoder enc;
    enc.list_count(pod_batches.size());
    for (const auto& batch : pod_batches) enc.bytes(encode_batch(batch));
    return enc.take();
}

InputPayload InputPayload::decode(BytesView data) {
    Decoder dec(data);
    InputPayload p;
    size_t n = dec.list_count();
    p.pod_batches.resize(n);
    for (size_t i = 0; i < n; ++i) {
        Bytes batch_bytes = dec.bytes();
        Decoder bdec(batch_bytes);
        size_t m = bdec.list_count();
        for (size_t j = 0; j < m; ++j) p.pod_batches[i].push_back(DataRecord::decode_from(bdec));
        bdec.expect_done();
    }
    dec.expect_done();
    return p;
}

Bytes StepPayload::encode() const {
    Encoder enc;
    enc.u8(1);  // payload version
    enc.list_count(records.size());
    for (const auto& [rec, tag] : records) {
        rec.encode_into(enc);
        enc.u8(static_cast<uint8_t>(tag.verdict));
        enc.str(tag.reason);
    }
    enc.list_count(matched.size());
    for (uint8_t m : matched) enc.u8(m);
    enc.u32(summary.verified);
    enc.u32(summary.alleged);
    enc.u32(summary.rejected);
    enc.list_count(pod_batch_digests.size());
    for (const Digest& d : pod_batch_digests) enc.raw(d.view());
    enc.u8(static_cast<uint8_t>(agg));
    enc.boolean(result.has_value());
    if (result) enc.bytes(encode_value(*result));
    enc.f64(clip_lo);
    enc.f64(clip_hi);
    enc.u64(contributing);
    enc.list_count(contributing_pods.size());
    for (const auto& pod : contributing_pods) enc.str(pod);
    enc.list_count(envelopes.size());
    for (const Bytes& e : envelopes) enc.bytes(e);
    enc.boolean(alleged);
    enc.boolean(dp_applied);
    return enc.take();
}

StepPayload StepPayload::decode(BytesView data) {
    Decoder dec(data);
    if (dec.u8() != 1) throw DecodeError("unknown payload version");
    StepPayload p;
    size_t n = dec.list_count();
    for (size_t i = 0; i < n; ++i) {
        DataRecord rec = DataRecord::decode_from(dec);
        AuthTag tag;
        tag.verdict = static_cast<Verdict>(dec.u8());
        tag.reason = dec.str();
        p.records.emplace_back(std::move(rec), std::move(tag));
    }
    n = dec.list_count();
    for (size_t i = 0; i < n; ++i) p.matched.push_back(dec.u8());
    p.summary.verified = dec.u32();
    p.summary.alleged = dec.u32();
    p.summary.rejected = dec.u32();
    n = dec.list_count();
    for (size_t i = 0; i < n; ++i) {
        Digest d;
        Bytes raw = dec.raw(32);
        std::memcpy(d.bytes.data(), raw.data(), 32);
        p.pod_batch_digests.push_back(d);
    }
    p.agg = static_cast<AggKind>(dec.u8());
    if (dec.boolean()) p.result = decode_value(dec.bytes());
    p.clip_lo = dec.f64();
    p.clip_hi = dec.f64();
    p.contributing = dec.u64();
    n = dec.list_count();
    for (size_t i = 0; i < n; ++i) p.contributing_pods.push_back(dec.str());
    n = dec.list_count();
    for (size_t i = 0; i < n; ++i) p.envelopes.push_back(dec.bytes());
    p.alleged = dec.boolean();
    p.dp_applied = dec.boolean();
    dec.expect_done();
    return p;
}

Bytes seal_envelope(DetRng& rng, const PublicKey& pod, const Record& content) {
    SealedBlob blob = seal_to(rng, pod, encode_record(content));
    // Recipient id deliberately omitted: envelopes are routed positionally so
    // the consumer never sees which POD an envelope addresses.
    Encoder enc;
    enc.raw(BytesView(blob.ephemeral.data(), blob.ephemeral.size()));
    enc.bytes(blob.ciphertext);
    return enc.take();
}

Record open_envelope(const KeyPair& pod, BytesView envelope) {
    Decoder dec(envelope);
    SealedBlob blob;
    Bytes eph = dec.raw(32);
    std::memcpy(blob.ephemeral.data(), eph.data(), 32);
    blob.ciphertext = dec.bytes();
    dec.expect_done();
    blob.recipient = key_id(pod.pub);
    return decode_record(unseal(pod, blob));
}

// --- function digests ---

static Digest tagged_digest(std::string_view tag, const Bytes& extra = {}) {
    Encoder enc;
    enc.str(tag);
    enc.bytes(extra);
    return sha256(enc.data());
}

Digest data_prover_fn_digest() {
    return tagged_digest("pixiu.data_prover.v1");
}

Digest dp_gate_fn_digest(const dp::PrivacyParams& params) {
    Encoder enc;
    enc.f64(params.epsilon);
    return tagged_digest("pixiu.dp_gate.laplace.v1", enc.data());
}

Digest fedavg_fn_digest(const std::string& vec_field, double clip_lo, double clip_hi) {
    Encoder enc;
    enc.str(vec_field);
    enc.f64(clip_lo);
    enc.f64(clip_hi);
    return tagged_digest("pixiu.fedavg.v1", enc.data());
}

Digest identity_fn_digest() {
    return tagged_digest("pixiu.identity.v1");
}

// --- instance ---

LambdaInstance::LambdaInstance(KeyPair keypair, SecurityLevel level, LambdaConfig config)
    : id_(key_id(keypair.pub)), keypair_(std::move(keypair)), level_(level),
      config_(std::move(config)) {
    recompute_fn_digest();
}

void LambdaInstance::recompute_fn_digest() {
    if (config_.identity_fn) {
        fn_digest_ = identity_fn_digest();
        return;
    }
    switch (config_.kind) {
        case LambdaKind::DataProver:
            fn_digest_ = data_prover_fn_digest();
            break;
        case LambdaKind::TaskExec:
            fn_digest_ = config_.task ? taskdsl::fn_digest(config_.task) : Digest::zero();
            break;
        case LambdaKind::DpGate:
            fn_digest_ = dp_gate_fn_digest(config_.privacy);
            break;
        case LambdaKind::Aggregator:
            fn_digest_ = fedavg_fn_digest(config_.vec_field, config_.clip_lo, config_.clip_hi);
            break;
    }
}

void LambdaInstance::swap_function(taskdsl::ExprPtr task) {
    config_.task = std::move(task);
    recompute_fn_digest();
}

void LambdaInstance::make_identity() {
    config_.identity_fn = true;
    recompute_fn_digest();
}

Bytes LambdaInstance::validate_input(const SymSealed& sealed_input,
                                     const std::optional<ExecutionProof>& expected_prev) const {
    if (!ingress_) throw StepFailure("NOKEY", "ingress key not installed");
    Bytes plain;
    try {
        plain = sym_unseal(*ingress_, sealed_input);
    } catch (const AuthFailure& e) {
        throw StepFailure("AUTHFAILURE", e.what());
    }
    if (expected_prev && sha256(plain) != expected_prev->output_digest)
        throw StepFailure("DIGESTMISMATCH", "input does not match predecessor's attested output");
    return plain;
}

StepPayload LambdaInstance::apply_data_prover(BytesView input) const {
    InputPayload in = InputPayload::decode(input);
    StepPayload out;
    std::vector<DataRecord> flat;
    for (const auto& batch : in.pod_batches) {
        out.pod_batch_digests.push_back(sha256(InputPayload::encode_batch(batch)));
        flat.insert(flat.end(), batch.begin(), batch.end());
    }
    ProverOutput proved = prover_lambda_fn(flat, config_.signers);
    out.records = std::move(proved.validated);
    out.summary = proved.summary;
    out.alleged = proved.summary.alleged > 0;
    for (const auto& [rec, tag] : out.records) {
        if (std::find(out.contributing_pods.begin(), out.contributing_pods.end(), rec.pod_id) ==
            out.contributing_pods.end())
            out.contributing_pods.push_back(rec.pod_id);
    }
    return out;
}

StepPayload LambdaInstance::apply_task_exec(StepPayload payload, BytesView raw_input) const {
    if (!config_.task) throw StepFailure("NOTASK", "no task installed");
    const taskdsl::ExprPtr& task = config_.task;

    // Envelope randomness is derived from the input so identical inputs give
    // identical outputs.
    Encoder seed_enc;
    seed_enc.bytes(raw_input);
    seed_enc.str(id_);
    Digest seed = sha256(seed_enc.data());
    uint64_t seed64 = 0;
    for (int i = 0; i < 8; ++i) seed64 = (seed64 << 8) | seed.bytes[i];
    DetRng env_rng(seed64);

    try {
        if (taskdsl::is_aggregate(task)) {
            using taskdsl::Expr;
            if (task->kind != Expr::Kind::Count && task->kind != Expr::Kind::Sum &&
                task->kind != Expr::Kind::Mean)
                throw StepFailure("UNRELEASABLE",
                                  "aggregate composed below the root has no known sensitivity");
            RecordList batch;
            for (const auto& [rec, tag] : payload.records) batch.push_back(rec.payload);
            Value v = taskdsl::eval_batch(task, batch);
            switch (task->kind) {
                case Expr::Kind::Count:
                    payload.agg = AggKind::Count;
                    payload.result = v;
                    break;
                case Expr::Kind::Sum:
                    payload.agg = AggKind::Sum;
                    payload.result = v;
                    payload.clip_lo = task->clip_lo;
                    payload.clip_hi = task->clip_hi;
                    break;
                default:
                    payload.agg = AggKind::Mean;
                    payload.result = Value(v.as_float() * static_cast<double>(batch.size()));
                    payload.clip_lo = task->clip_lo;
                    payload.clip_hi = task->clip_hi;
                    break;
            }
            payload.contributing = batch.size();
        } else {
            // Predicate task: mark matches, count them, and prepare one sealed
            // delivery per participating POD.
            int64_t matches = 0;
            std::map<std::string, bool> pod_matched;
            payload.matched.clear();
            for (const auto& [rec, tag] : payload.records) {
                Value v = taskdsl::eval(task, rec.payload);
                if (!v.is_bool()) throw taskdsl::TypeMismatch("predicate must yield bool");
                bool m = v.as_bool();
                payload.matched.push_back(m ? 1 : 0);
                if (m) {
                    ++matches;
                    pod_matched[rec.pod_id] = true;
                }
            }
            payload.agg = AggKind::Count;
            payload.result = Value(matches);
            payload.contributing = payload.records.size();
            if (!config_.ad_text.empty()) {
                for (const PublicKey& pod : config_.pod_keys) {
                    bool m = pod_matched.count(key_id(pod)) > 0;
                    Record content;
                    content.emplace("matched", Value(m));
                    content.emplace("message", Value(m ? config_.ad_text : std::string()));
                    payload.envelopes.push_back(seal_envelope(env_rng, pod, content));
                }
            }
        }
    } catch (const taskdsl::EvalError& e) {
        throw StepFailure("TYPEMISMATCH", e.what());
    }
    return payload;
}

StepPayload LambdaInstance::apply_aggregator(StepPayload payload) const {
    FloatVec total;
    uint64_t n = 0;
    for (const auto& [rec, tag] : payload.records) {
        auto it = rec.payload.find(config_.vec_field);
        if (it == rec.payload.end() || !it->second.is_vec())
            throw StepFailure("TYPEMISMATCH", "record lacks vector field " + config_.vec_field);
        const FloatVec& v = it->second.as_vec();
        if (total.empty()) total.resize(v.size(), 0.0);
        if (v.size() != total.size())
            throw StepFailure("TYPEMISMATCH", "vector length mismatch");
        for (size_t i = 0; i < v.size(); ++i) {
            double x = v[i];
            if (x < config_.clip_lo) x = config_.clip_lo;
            if (x > config_.clip_hi) x = config_.clip_hi;
            total[i] += x;
        }
        ++n;
    }
    if (n == 0) throw StepFailure("EMPTYINPUT", "no records to aggregate");
    for (double& x : total) x /= static_cast<double>(n);
    payload.agg = AggKind::VecMean;
    payload.result = Value(std::move(total));
    payload.clip_lo = config_.clip_lo;
    payload.clip_hi = config_.clip_hi;
    payload.contributing = n;
    return payload;
}

StepPayload LambdaInstance::apply_dp_gate(StepPayload payload) const {
    if (!payload.result || payload.agg == AggKind::None)
        throw StepFailure("UNRELEASABLE", "nothing to release");
    if (!config_.noise) throw StepFailure("NONOISE", "no noise source configured");
    const dp::PrivacyParams& p = config_.privacy;

    auto charge = [&](double epsilon) {
        if (!config_.ledger) return;
        if (auto short_pods = config_.ledger->charge(payload.contributing_pods, epsilon))
            throw StepFailure("BUDGETEXHAUSTED",
                              std::to_string(short_pods->pod_ids.size()) +
                                  " pods short of budget");
    };

    try {
        switch (payload.agg) {
            case AggKind::Count: {
                charge(p.epsilon);
                dp::PrivacyParams cp{p.epsilon, 1.0};
                payload.result = Value(dp::dp_count(payload.result->as_int(), cp, config_.noise));
                break;
            }
            case AggKind::Sum: {
                charge(p.epsilon);
                dp::PrivacyParams sp{p.epsilon, payload.clip_hi - payload.clip_lo};
                payload.result = Value(dp::dp_sum(payload.result->as_float(), payload.clip_lo,
                                                  payload.clip_hi, sp, config_.noise));
                break;
            }
            case AggKind::Mean: {
                // Released as a (sum, count) pair, each charged separately.
                charge(p.epsilon);
                charge(p.epsilon);
                dp::PrivacyParams sp{p.epsilon, payload.clip_hi - payload.clip_lo};
                double noisy_sum = dp::dp_sum(payload.result->as_float(), payload.clip_lo,
                                              payload.clip_hi, sp, config_.noise);
                dp::PrivacyParams cp{p.epsilon, 1.0};
                double noisy_count = dp::dp_count(
                    static_cast<int64_t>(payload.contributing), cp, config_.noise);
                payload.result = Value(FloatVec{noisy_sum, noisy_count});
                break;
            }
            case AggKind::VecMean: {
                charge(p.epsilon);
                if (payload.contributing == 0)
                    throw StepFailure("EMPTYINPUT", "mean over zero records");
                double scale = (payload.clip_hi - payload.clip_lo) /
                               (static_cast<double>(payload.contributing) * p.epsilon);
                FloatVec noisy = payload.result->as_vec();
                for (double& x : noisy) {
                    double u = config_.noise();
                    if (u != 0.0) x += dp::laplace_sample(scale, u);
                }
                payload.result = Value(std::move(noisy));
                break;
            }
            default:
                throw StepFailure("UNRELEASABLE", "unknown aggregate kind");
        }
    } catch (const dp::SensitivityMismatch& e) {
        throw StepFailure("SENSITIVITYMISMATCH", e.what());
    } catch (const dp::InvalidScale& e) {
        throw StepFailure("INVALIDSCALE", e.what());
    }

    // Strip everything that could identify a POD or reveal raw records.
    payload.records.clear();
    payload.matched.clear();
    payload.contributing_pods.clear();
    payload.dp_applied = true;
    return payload;
}

Bytes LambdaInstance::run_sandbox(BytesView input) const {
    if (config_.identity_fn) {
        // Faulty pass-through lambda: forwards its input unchanged.
        return Bytes(input.begin(), input.end());
    }
    try {
        switch (config_.kind) {
            case LambdaKind::DataProver:
                return apply_data_prover(input).encode();
            case LambdaKind::TaskExec:
                return apply_task_exec(StepPayload::decode(input), input).encode();
            case LambdaKind::Aggregator:
                return apply_aggregator(StepPayload::decode(input)).encode();
            case LambdaKind::DpGate:
                return apply_dp_gate(StepPayload::decode(input)).encode();
        }
    } catch (const DecodeError& e) {
        throw StepFailure("DECODEERROR", e.what());
    }
    throw StepFailure("BADKIND", "unknown lambda kind");
}

ExecutionProof LambdaInstance::generate_proof(const TaskId& task_id, uint32_t step_index,
                                              const Digest& input_digest,
                                              const Digest& output_digest,
                                              const std::optional<ExecutionProof>& prev) const {
    Digest prev_digest = prev ? prev->proof_digest() : Digest::zero();
    return make_proof(keypair_, task_id, step_index, config_.kind, input_digest, fn_digest_,
                      output_digest, prev_digest);
}

StepOutcome LambdaInstance::execute_genesis(const TaskId& task_id,
                                            const std::vector<SymSealed>& pod_inputs) {
    try {
        if (!ingress_) throw StepFailure("NOKEY", "ingress key not installed");
        InputPayload input;
        for (const SymSealed& blob : pod_inputs) {
            Bytes batch_bytes;
            try {
                batch_bytes = sym_unseal(*ingress_, blob);
            } catch (const AuthFailure& e) {
                throw StepFailure("AUTHFAILURE", e.what());
            }
            Decoder dec(batch_bytes);
            std::vector<DataRecord> batch;
            size_t n = dec.list_count();
            for (size_t i = 0; i < n; ++i) batch.push_back(DataRecord::decode_from(dec));
            dec.expect_done();
            input.pod_batches.push_back(std::move(batch));
        }
        Bytes plain = input.encode();
        Digest input_digest = sha256(plain);
        Bytes output = run_sandbox(plain);
        Digest output_digest = sha256(output);
        if (!egress_) throw StepFailure("NOKEY", "egress key not installed");

        Digest nonce_seed = sha256(output);
        uint64_t seed64 = 0;
        for (int i = 0; i < 8; ++i) seed64 = (seed64 << 8) | nonce_seed.bytes[i];
        DetRng nonce_rng(seed64 ^ 0x9e3779b97f4a7c15ull);

        StepOutcome outcome;
        outcome.sealed_output = sym_seal(nonce_rng, *egress_, output);
        outcome.proof = generate_proof(task_id, 0, input_digest, output_digest, std::nullopt);
        return outcome;
    } catch (const StepFailure& f) {
        StepOutcome outcome;
        outcome.proof = make_proof(keypair_, task_id, 0, config_.kind, Digest::zero(), fn_digest_,
                                   Digest::zero(), Digest::zero(), f.reason);
        return outcome;
    } catch (const DecodeError& e) {
        StepOutcome outcome;
        outcome.proof = make_proof(keypair_, task_id, 0, config_.kind, Digest::zero(), fn_digest_,
                                   Digest::zero(), Digest::zero(), std::string("DECODEERROR"));
        return outcome;
    }
}

StepOutcome LambdaInstance::execute_step(const TaskId& task_id, uint32_t step_index,
                                         const SymSealed& sealed_input,
                                         const std::optional<ExecutionProof>& prev) {
    Digest prev_digest = prev ? prev->proof_digest() : Digest::zero();
    try {
        Bytes plain = validate_input(sealed_input, prev);
        Digest input_digest = sha256(plain);
        Bytes output = run_sandbox(plain);
        Digest output_digest = sha256(output);
        if (!egress_) throw StepFailure("NOKEY", "egress key not installed");

        // Seal nonce derived from the output so the whole step is a function
        // of its inputs.
        Digest nonce_seed = sha256(output);
        uint64_t seed64 = 0;
        for (int i = 0; i < 8; ++i) seed64 = (seed64 << 8) | nonce_seed.bytes[i];
        DetRng nonce_rng(seed64 ^ 0x9e3779b97f4a7c15ull);
        SymSealed sealed_output = sym_seal(nonce_rng, *egress_, output);

        StepOutcome outcome;
        outcome.sealed_output = std::move(sealed_output);
        outcome.proof = generate_proof(task_id, step_index, input_digest, output_digest, prev);
        return outcome;
    } catch (const StepFailure& f) {
        StepOutcome outcome;
        outcome.proof = make_proof(keypair_, task_id, step_index, config_.kind, Digest::zero(),
                                   fn_digest_, Digest::zero(), prev_digest, f.reason);
        return outcome;
    }
}

}  // namespace pixiu
