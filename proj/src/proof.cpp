#include "pixiu/proof.hpp"

#include <charconv>
#include <cstring>

#include "pixiu/codec.hpp"

namespace pixiu {

std::string task_id_hex(const TaskId& id) {
    return hex_encode(BytesView(id.data(), id.size()));
}

TaskId task_id_from_hex(std::string_view hex) {
    Bytes raw = hex_decode(hex);
    if (raw.size() != 16) throw std::invalid_argument("task id must be 16 bytes");
    TaskId id;
    std::memcpy(id.data(), raw.data(), 16);
    return id;
}

std::string kind_token(LambdaKind kind) {
    switch (kind) {
        case LambdaKind::DataProver: return "DATAPROVER";
        case LambdaKind::TaskExec: return "TASKEXEC";
        case LambdaKind::DpGate: return "DPGATE";
        case LambdaKind::Aggregator: return "AGGREGATOR";
    }
    return "?";
}

std::optional<LambdaKind> kind_from_token(std::string_view token) {
    if (token == "DATAPROVER") return LambdaKind::DataProver;
    if (token == "TASKEXEC") return LambdaKind::TaskExec;
    if (token == "DPGATE") return LambdaKind::DpGate;
    if (token == "AGGREGATOR") return LambdaKind::Aggregator;
    return std::nullopt;
}

Bytes ExecutionProof::signing_bytes() const {
    Encoder enc;
    enc.raw(BytesView(task_id.data(), task_id.size()));
    enc.u32(step_index);
    enc.u8(static_cast<uint8_t>(kind));
    enc.boolean(failure_reason.has_value());
    if (failure_reason) enc.str(*failure_reason);
    enc.raw(input_digest.view());
    enc.raw(fn_digest.view());
    enc.raw(output_digest.view());
    enc.raw(prev_proof_digest.view());
    enc.str(signer);
    return enc.take();
}

static std::string kind_field(const ExecutionProof& p) {
    std::string token = kind_token(p.kind);
    if (p.failure_reason) token += ":" + *p.failure_reason;
    return token;
}

std::string ExecutionProof::render_line() const {
    std::string line;
    line += task_id_hex(task_id);
    line += '|';
    line += std::to_string(step_index);
    line += '|';
    line += kind_field(*this);
    line += '|';
    line += input_digest.hex();
    line += '|';
    line += fn_digest.hex();
    line += '|';
    line += output_digest.hex();
    line += '|';
    line += prev_proof_digest.hex();
    line += '|';
    line += signer;
    line += '|';
    line += hex_encode(BytesView(signature.data(), signature.size()));
    return line;
}

Digest ExecutionProof::proof_digest() const {
    std::string line = render_line();
    size_t cut = line.rfind('|');
    return sha256(BytesView(reinterpret_cast<const uint8_t*>(line.data()), cut));
}

ExecutionProof ExecutionProof::parse_line(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '|') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (fields.size() != 9) throw std::invalid_argument("proof line must have 9 fields");

    ExecutionProof p;
    p.task_id = task_id_from_hex(fields[0]);
    {
        uint32_t idx = 0;
        auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), idx);
        if (res.ec != std::errc{} || res.ptr != fields[1].data() + fields[1].size())
            throw std::invalid_argument("bad step index");
        p.step_index = idx;
    }
    {
        std::string_view kf = fields[2];
        size_t colon = kf.find(':');
        std::string_view token = colon == std::string_view::npos ? kf : kf.substr(0, colon);
        auto kind = kind_from_token(token);
        if (!kind) throw std::invalid_argument("unknown lambda kind token");
        p.kind = *kind;
        if (colon != std::string_view::npos)
            p.failure_reason = std::string(kf.substr(colon + 1));
    }
    p.input_digest = Digest::from_hex(fields[3]);
    p.fn_digest = Digest::from_hex(fields[4]);
    p.output_digest = Digest::from_hex(fields[5]);
    p.prev_proof_digest = Digest::from_hex(fields[6]);
    p.signer = std::string(fields[7]);
    {
        Bytes sig = hex_decode(fields[8]);
        if (sig.size() != 64) throw std::invalid_argument("bad signature length");
        std::memcpy(p.signature.data(), sig.data(), 64);
    }
    return p;
}

ExecutionProof make_proof(const KeyPair& instance, const TaskId& task_id, uint32_t step_index,
                          LambdaKind kind, const Digest& input_digest, const Digest& fn_digest,
                          const Digest& output_digest, const Digest& prev_proof_digest,
                          std::optional<std::string> failure_reason) {
    ExecutionProof p;
    p.task_id = task_id;
    p.step_index = step_index;
    p.kind = kind;
    p.failure_reason = std::move(failure_reason);
    p.input_digest = input_digest;
    p.fn_digest = fn_digest;
    p.output_digest = p.failure_reason ? Digest::zero() : output_digest;
    p.prev_proof_digest = prev_proof_digest;
    p.signer = key_id(instance.pub);
    p.signature = sign(instance, p.signing_bytes());
    return p;
}

bool verify_proof_signature(const PublicKey& signer, const ExecutionProof& proof) {
    return verify(signer, proof.signing_bytes(), proof.signature);
}

}  // namespace pixiu
