#include "doctest.h"
#include "pixiu/trust_lambda.hpp"

using namespace pixiu;

namespace {

struct Rig {
    DetRng rng{55};
    KeyPair inst_key = KeyPair::from_seed(rng.array<32>());
    SymKey ingress = rng.array<32>();
    SymKey egress = rng.array<32>();
    TaskId task{{1, 2, 3, 4}};

    LambdaInstance make(LambdaConfig cfg) {
        LambdaInstance inst(inst_key, SecurityLevel::MidLevel, std::move(cfg));
        inst.install_ingress_key(ingress);
        inst.install_egress_key(egress);
        return inst;
    }

    LambdaInstance task_exec(const std::string& code) {
        LambdaConfig cfg;
        cfg.kind = LambdaKind::TaskExec;
        cfg.task = taskdsl::parse(code);
        return make(std::move(cfg));
    }

    StepPayload four_records() {
        StepPayload p;
        for (int i = 0; i < 4; ++i) {
            DataRecord rec;
            rec.pod_id = "pod" + std::to_string(i);
            rec.payload = {{"age", Value(int64_t(15 + i * 2))}};  // 15 17 19 21
            rec.source_kind = SourceKind::Alleged;
            p.records.emplace_back(rec, AuthTag{Verdict::Alleged, ""});
            p.contributing_pods.push_back(rec.pod_id);
        }
        p.summary.alleged = 4;
        return p;
    }

    ExecutionProof prev_proof(const Digest& output) {
        return make_proof(inst_key, task, 0, LambdaKind::DataProver, sha256(to_bytes("x")),
                          data_prover_fn_digest(), output, Digest::zero());
    }
};

}  // namespace

TEST_SUITE("trust_lambda") {

TEST_CASE("validator recovers plaintext and checks the predecessor digest") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("true");
    Bytes plain = rig.four_records().encode();
    SymSealed sealed = sym_seal(rig.rng, rig.ingress, plain);

    CHECK(inst.validate_input(sealed, rig.prev_proof(sha256(plain))) == plain);
}

TEST_CASE("substituted sealed blob fails authentication") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("true");
    SymKey stranger = rig.rng.array<32>();
    SymSealed sealed = sym_seal(rig.rng, stranger, to_bytes("not for you"));
    try {
        inst.validate_input(sealed, std::nullopt);
        FAIL("expected auth failure");
    } catch (const StepFailure& e) {
        CHECK(e.reason == "AUTHFAILURE");
    }
}

TEST_CASE("mismatched predecessor output yields a digest-mismatch failure proof") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("true");
    Bytes plain = rig.four_records().encode();
    SymSealed sealed = sym_seal(rig.rng, rig.ingress, plain);
    ExecutionProof lying_prev = rig.prev_proof(sha256(to_bytes("different output")));

    StepOutcome out = inst.execute_step(rig.task, 1, sealed, lying_prev);
    CHECK_FALSE(out.ok());
    REQUIRE(out.proof.is_failure());
    CHECK(*out.proof.failure_reason == "DIGESTMISMATCH");
    CHECK(out.proof.output_digest.is_zero());
    CHECK(out.proof.step_index == 1);
}

TEST_CASE("validator auth failure becomes a failure proof at this step") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("true");
    SymKey stranger = rig.rng.array<32>();
    SymSealed sealed = sym_seal(rig.rng, stranger, to_bytes("garbage"));

    StepOutcome out = inst.execute_step(rig.task, 2, sealed, std::nullopt);
    CHECK_FALSE(out.ok());
    CHECK(*out.proof.failure_reason == "AUTHFAILURE");
    CHECK(out.proof.step_index == 2);
    CHECK(verify_proof_signature(rig.inst_key.pub, out.proof));
}

TEST_CASE("predicate marks 2 of 4 records and counts them") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("age >= 18");
    StepPayload in = rig.four_records();
    StepPayload out = StepPayload::decode(inst.run_sandbox(in.encode()));

    CHECK(out.matched == std::vector<uint8_t>{0, 0, 1, 1});
    CHECK(out.result == Value(int64_t(2)));
    CHECK(out.agg == AggKind::Count);
    CHECK(out.records.size() == 4);
}

TEST_CASE("identity predicate true keeps the whole input set") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("true");
    StepPayload in = rig.four_records();
    StepPayload out = StepPayload::decode(inst.run_sandbox(in.encode()));
    CHECK(out.matched == std::vector<uint8_t>{1, 1, 1, 1});
    CHECK(out.records.size() == in.records.size());
}

TEST_CASE("same input twice gives identical outputs and proofs") {
    Rig rig;
    LambdaInstance inst = rig.task_exec("age >= 18");
    Bytes plain = rig.four_records().encode();
    SymSealed sealed = sym_seal(rig.rng, rig.ingress, plain);
    ExecutionProof prev = rig.prev_proof(sha256(plain));

    StepOutcome a = inst.execute_step(rig.task, 1, sealed, prev);
    StepOutcome b = inst.execute_step(rig.task, 1, sealed, prev);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(a.proof.render_line() == b.proof.render_line());
    CHECK(a.sealed_output->encode() == b.sealed_output->encode());
}

TEST_CASE("proof carries digests only, never payload bytes") {
    Rig rig;
    for (int trial = 0; trial < 100; ++trial) {
        Bytes payload(64);
        rig.rng.fill(payload.data(), payload.size());
        StepPayload in;
        DataRecord rec;
        rec.pod_id = "p";
        rec.payload = {{"blob", Value(std::string(payload.begin(), payload.end()))}};
        rec.source_kind = SourceKind::Alleged;
        in.records.emplace_back(rec, AuthTag{Verdict::Alleged, ""});

        LambdaInstance inst = rig.task_exec("true");
        SymSealed sealed = sym_seal(rig.rng, rig.ingress, in.encode());
        StepOutcome out = inst.execute_step(rig.task, 1, sealed, std::nullopt);
        REQUIRE(out.ok());
        std::string line = out.proof.render_line();
        for (size_t off = 0; off + 8 <= payload.size(); ++off) {
            BytesView window(payload.data() + off, 8);
            CHECK_FALSE(contains_window(to_bytes(line), window));
        }
    }
}

TEST_CASE("genesis proof has a zero back-link") {
    Rig rig;
    LambdaConfig cfg;
    cfg.kind = LambdaKind::DataProver;
    LambdaInstance prover = rig.make(std::move(cfg));

    std::vector<DataRecord> batch;
    DataRecord rec;
    rec.pod_id = "p0";
    rec.payload = {{"x", Value(int64_t(1))}};
    rec.source_kind = SourceKind::Alleged;
    batch.push_back(rec);

    SymSealed pod_blob = sym_seal(rig.rng, rig.ingress, InputPayload::encode_batch(batch));
    StepOutcome out = prover.execute_genesis(rig.task, {pod_blob});
    REQUIRE(out.ok());
    CHECK(out.proof.prev_proof_digest.is_zero());
    CHECK(out.proof.step_index == 0);
    CHECK(out.proof.kind == LambdaKind::DataProver);
}

TEST_CASE("aggregator averages clipped vectors elementwise") {
    Rig rig;
    LambdaConfig cfg;
    cfg.kind = LambdaKind::Aggregator;
    cfg.vec_field = "weights";
    cfg.clip_lo = -10;
    cfg.clip_hi = 10;
    LambdaInstance agg = rig.make(std::move(cfg));

    StepPayload in;
    for (FloatVec v : {FloatVec{1, 1}, FloatVec{3, 3}}) {
        DataRecord rec;
        rec.pod_id = "p";
        rec.payload = {{"weights", Value(std::move(v))}};
        rec.source_kind = SourceKind::Alleged;
        in.records.emplace_back(rec, AuthTag{Verdict::Alleged, ""});
    }
    StepPayload out = StepPayload::decode(agg.run_sandbox(in.encode()));
    CHECK(out.result == Value(FloatVec{2, 2}));
    CHECK(out.agg == AggKind::VecMean);
}

TEST_CASE("dp gate strips records and pod ids before release") {
    Rig rig;
    LambdaConfig cfg;
    cfg.kind = LambdaKind::DpGate;
    cfg.privacy = dp::PrivacyParams{1.0, 1.0};
    cfg.noise = dp::zero_noise();
    LambdaInstance gate = rig.make(std::move(cfg));

    StepPayload in = rig.four_records();
    in.agg = AggKind::Count;
    in.result = Value(int64_t(2));
    StepPayload out = StepPayload::decode(gate.run_sandbox(in.encode()));
    CHECK(out.records.empty());
    CHECK(out.contributing_pods.empty());
    CHECK(out.dp_applied);
    CHECK(out.result == Value(2.0));
}

TEST_CASE("dp gate refuses a payload with nothing to release") {
    Rig rig;
    LambdaConfig cfg;
    cfg.kind = LambdaKind::DpGate;
    cfg.privacy = dp::PrivacyParams{1.0, 1.0};
    cfg.noise = dp::zero_noise();
    LambdaInstance gate = rig.make(std::move(cfg));

    CHECK_THROWS_AS(gate.run_sandbox(rig.four_records().encode()), StepFailure);
}

TEST_CASE("budget exhaustion aborts the release") {
    Rig rig;
    dp::BudgetLedger ledger;
    ledger.set_initial("pod0", 0.2);  // others never funded
    LambdaConfig cfg;
    cfg.kind = LambdaKind::DpGate;
    cfg.privacy = dp::PrivacyParams{1.0, 1.0};
    cfg.noise = dp::zero_noise();
    cfg.ledger = &ledger;
    LambdaInstance gate = rig.make(std::move(cfg));

    StepPayload in = rig.four_records();
    in.agg = AggKind::Count;
    in.result = Value(int64_t(2));
    Bytes encoded = in.encode();
    SymSealed sealed = sym_seal(rig.rng, rig.ingress, encoded);

    StepOutcome out = gate.execute_step(rig.task, 2, sealed, std::nullopt);
    CHECK_FALSE(out.ok());
    CHECK(*out.proof.failure_reason == "BUDGETEXHAUSTED");
    CHECK(ledger.remaining("pod0") == 0.2);
}

TEST_CASE("envelopes open only with the right pod key") {
    Rig rig;
    KeyPair pod = KeyPair::from_seed(rig.rng.array<32>());
    KeyPair other = KeyPair::from_seed(rig.rng.array<32>());
    Record content{{"matched", Value(true)}, {"message", Value(std::string("hello"))}};

    Bytes env = seal_envelope(rig.rng, pod.pub, content);
    CHECK(open_envelope(pod, env) == content);
    CHECK_THROWS_AS(open_envelope(other, env), AuthFailure);
    // the envelope names no recipient
    CHECK_FALSE(contains_window(env, BytesView(pod.pub.data(), pod.pub.size())));
}

TEST_CASE("step payload round trip keeps every field") {
    Rig rig;
    StepPayload p = rig.four_records();
    p.matched = {1, 0, 1, 0};
    p.agg = AggKind::Sum;
    p.result = Value(12.5);
    p.clip_lo = -1;
    p.clip_hi = 1;
    p.contributing = 4;
    p.envelopes.push_back(to_bytes("opaque"));
    p.alleged = true;
    p.dp_applied = false;
    p.pod_batch_digests.push_back(sha256(to_bytes("leaf")));

    StepPayload q = StepPayload::decode(p.encode());
    CHECK(q.matched == p.matched);
    CHECK(q.agg == p.agg);
    CHECK(q.result == p.result);
    CHECK(q.clip_lo == p.clip_lo);
    CHECK(q.clip_hi == p.clip_hi);
    CHECK(q.contributing == p.contributing);
    CHECK(q.contributing_pods == p.contributing_pods);
    CHECK(q.envelopes == p.envelopes);
    CHECK(q.alleged == p.alleged);
    CHECK(q.dp_applied == p.dp_applied);
    CHECK(q.pod_batch_digests == p.pod_batch_digests);
    CHECK(q.records.size() == p.records.size());
}

}  // suite trust_lambda
