#include <random>

#include "doctest.h"
#include "pixiu/data_prover.hpp"

using namespace pixiu;

namespace {

struct Fixture {
    DetRng rng{17};
    KeyPair camera = KeyPair::from_seed(rng.array<32>());
    KeyPair org = KeyPair::from_seed(rng.array<32>());
    SignerRegistry registry{{"camera_fw", camera.pub}, {"survey_org", org.pub}};

    DataRecord hw_record(int n) {
        DataRecord rec;
        rec.pod_id = "pod-a";
        rec.payload = {{"frame", Value(int64_t(n))}};
        rec.source_kind = SourceKind::HardwareSigned;
        rec.signer = "camera_fw";
        rec.source_signature = sign_payload(camera, rec.payload);
        return rec;
    }

    DataRecord alleged_record(const std::string& answer) {
        DataRecord rec;
        rec.pod_id = "pod-b";
        rec.payload = {{"answer", Value(answer)}};
        rec.source_kind = SourceKind::Alleged;
        return rec;
    }
};

}  // namespace

TEST_SUITE("data_prover") {

TEST_CASE("camera record signed by a registered device key is verified") {
    Fixture f;
    AuthTag tag = authenticate_record(f.hw_record(1), f.registry);
    CHECK(tag.verdict == Verdict::Verified);
}

TEST_CASE("payload bit flipped after signing is rejected") {
    Fixture f;
    DataRecord rec = f.hw_record(1);
    rec.payload["frame"] = Value(int64_t(2));
    CHECK(authenticate_record(rec, f.registry).verdict == Verdict::Rejected);
}

TEST_CASE("self-reported answer without signature is alleged") {
    Fixture f;
    CHECK(authenticate_record(f.alleged_record("yes"), f.registry).verdict == Verdict::Alleged);
}

TEST_CASE("unknown signer and missing signature are rejected") {
    Fixture f;
    DataRecord rec = f.hw_record(1);
    rec.signer = "someone_else";
    CHECK(authenticate_record(rec, f.registry).verdict == Verdict::Rejected);

    DataRecord unsigned_claim = f.hw_record(2);
    unsigned_claim.source_signature.reset();
    CHECK(authenticate_record(unsigned_claim, f.registry).verdict == Verdict::Rejected);
}

TEST_CASE("batch of 3 verified plus 1 rejected drops the bad record") {
    Fixture f;
    std::vector<DataRecord> batch = {f.hw_record(1), f.hw_record(2), f.hw_record(3)};
    DataRecord bad = f.hw_record(4);
    (*bad.source_signature)[10] ^= 0x01;
    batch.push_back(bad);

    ProverOutput out = prover_lambda_fn(batch, f.registry);
    CHECK(out.validated.size() == 3);
    CHECK(out.summary == VerdictSummary{3, 0, 1});
}

TEST_CASE("empty batch gives empty output and zero summary") {
    Fixture f;
    ProverOutput out = prover_lambda_fn({}, f.registry);
    CHECK(out.validated.empty());
    CHECK(out.summary == VerdictSummary{});
}

TEST_CASE("10 alleged records all pass through tagged alleged") {
    Fixture f;
    std::vector<DataRecord> batch;
    for (int i = 0; i < 10; ++i) batch.push_back(f.alleged_record("v" + std::to_string(i)));
    ProverOutput out = prover_lambda_fn(batch, f.registry);
    REQUIRE(out.validated.size() == 10);
    for (const auto& [rec, tag] : out.validated) CHECK(tag.verdict == Verdict::Alleged);
    CHECK(out.summary == VerdictSummary{0, 10, 0});
}

TEST_CASE("fuzzed signatures: rejected records never pass, verdicts partition") {
    Fixture f;
    std::mt19937 gen(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<DataRecord> batch;
        size_t n = gen() % 12;
        size_t expect_rejected = 0;
        for (size_t i = 0; i < n; ++i) {
            int mode = gen() % 4;
            if (mode == 0) {
                batch.push_back(f.alleged_record("x"));
            } else {
                DataRecord rec = f.hw_record(int(gen()));
                if (mode == 2) {
                    (*rec.source_signature)[gen() % 64] ^= uint8_t(1 + gen() % 255);
                    ++expect_rejected;
                } else if (mode == 3) {
                    rec.signer = "nobody";
                    ++expect_rejected;
                }
                batch.push_back(rec);
            }
        }
        ProverOutput out = prover_lambda_fn(batch, f.registry);
        CHECK(out.summary.total() == n);
        CHECK(out.summary.rejected == expect_rejected);
        CHECK(out.validated.size() == n - expect_rejected);
        for (const auto& [rec, tag] : out.validated) CHECK(tag.verdict != Verdict::Rejected);
    }
}

TEST_CASE("data record encode decode round trip") {
    Fixture f;
    DataRecord rec = f.hw_record(7);
    DataRecord back = DataRecord::decode(rec.encode());
    CHECK(back.pod_id == rec.pod_id);
    CHECK(back.payload == rec.payload);
    CHECK(back.source_kind == rec.source_kind);
    CHECK(back.source_signature == rec.source_signature);
    CHECK(back.signer == rec.signer);
}

}  // suite data_prover
