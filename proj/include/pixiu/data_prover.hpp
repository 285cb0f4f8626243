#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pixiu/crypto.hpp"
#include "pixiu/value.hpp"

namespace pixiu {

enum class SourceKind : uint8_t { HardwareSigned = 0, OrgSigned = 1, Alleged = 2 };

std::string to_string(SourceKind kind);

struct DataRecord {
    std::string pod_id;                 // key id of the origin POD
    Record payload;
    SourceKind source_kind = SourceKind::Alleged;
    std::optional<Signature> source_signature;  // over canonical payload encoding
    std::optional<std::string> signer;          // key id of the signing device/org

    Bytes encode() const;
    static DataRecord decode(BytesView data);
    static DataRecord decode_from(class Decoder& dec);
    void encode_into(class Encoder& enc) const;
};

enum class Verdict : uint8_t { Verified = 0, Alleged = 1, Rejected = 2 };

std::string to_string(Verdict verdict);

struct AuthTag {
    Verdict verdict = Verdict::Alleged;
    std::string reason;
};

struct VerdictSummary {
    uint32_t verified = 0;
    uint32_t alleged = 0;
    uint32_t rejected = 0;

    uint32_t total() const { return verified + alleged + rejected; }
    bool operator==(const VerdictSummary&) const = default;
};

// signer id -> verification key
using SignerRegistry = std::map<std::string, PublicKey>;

AuthTag authenticate_record(const DataRecord& rec, const SignerRegistry& registry);

struct ProverOutput {
    // Rejected records are dropped; Alleged records pass through with their tag.
    std::vector<std::pair<DataRecord, AuthTag>> validated;
    VerdictSummary summary;
};

ProverOutput prover_lambda_fn(const std::vector<DataRecord>& batch,
                              const SignerRegistry& registry);

// Helper for PODs and test fixtures: sign the canonical payload.
Signature sign_payload(const KeyPair& signer, const Record& payload);

}  // namespace pixiu
