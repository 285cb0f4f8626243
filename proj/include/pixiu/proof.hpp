#pragma once

#include <array>
#include <optional>
#include <string>

#include "pixiu/crypto.hpp"

namespace pixiu {

using TaskId = std::array<uint8_t, 16>;

std::string task_id_hex(const TaskId& id);
TaskId task_id_from_hex(std::string_view hex);

enum class LambdaKind : uint8_t { DataProver = 0, TaskExec = 1, DpGate = 2, Aggregator = 3 };

std::string kind_token(LambdaKind kind);  // uppercase token for the proof line
std::optional<LambdaKind> kind_from_token(std::string_view token);

// Signed, payload-free record of one trust-lambda step. Contains only digests;
// never any input or output bytes.
struct ExecutionProof {
    TaskId task_id{};
    uint32_t step_index = 0;
    LambdaKind kind = LambdaKind::DataProver;
    std::optional<std::string> failure_reason;  // set on FailureProofs; output_digest is zeroed
    Digest input_digest;
    Digest fn_digest;
    Digest output_digest;
    Digest prev_proof_digest;  // 32 zero bytes at genesis
    std::string signer;        // instance key id
    Signature signature{};     // over the canonical encoding of all prior fields

    bool is_failure() const { return failure_reason.has_value(); }

    // Canonical bytes covered by the signature (everything except the
    // signature itself).
    Bytes signing_bytes() const;

    // Line format (newline not included):
    //   task_id|step_index|kind|input|fn|output|prev|signer|signature
    // hex lowercase digests, decimal step index, kind as uppercase token
    // (failure proofs carry KIND:REASON).
    std::string render_line() const;
    static ExecutionProof parse_line(std::string_view line);  // throws std::invalid_argument

    // Digest of this proof as referenced by the next step's back-link:
    // SHA-256 of the line bytes excluding the signature field (and its
    // separator) and the trailing newline.
    Digest proof_digest() const;
};

ExecutionProof make_proof(const KeyPair& instance, const TaskId& task_id, uint32_t step_index,
                          LambdaKind kind, const Digest& input_digest, const Digest& fn_digest,
                          const Digest& output_digest, const Digest& prev_proof_digest,
                          std::optional<std::string> failure_reason = std::nullopt);

bool verify_proof_signature(const PublicKey& signer, const ExecutionProof& proof);

}  // namespace pixiu
