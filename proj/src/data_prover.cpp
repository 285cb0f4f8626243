#include "pixiu/data_prover.hpp"

#include "pixiu/codec.hpp"

namespace pixiu {

std::string to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::HardwareSigned: return "hardware_signed";
        case SourceKind::OrgSigned: return "org_signed";
        case SourceKind::Alleged: return "alleged";
    }
    return "?";
}

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Verified: return "verified";
        case Verdict::Alleged: return "alleged";
        case Verdict::Rejected: return "rejected";
    }
    return "?";
}

void DataRecord::encode_into(Encoder& enc) const {
    enc.str(pod_id);
    enc.bytes(encode_record(payload));
    enc.u8(static_cast<uint8_t>(source_kind));
    enc.boolean(source_signature.has_value());
    if (source_signature) enc.raw(BytesView(source_signature->data(), source_signature->size()));
    enc.boolean(signer.has_value());
    if (signer) enc.str(*signer);
}

Bytes DataRecord::encode() const {
    Encoder enc;
    encode_into(enc);
    return enc.take();
}

DataRecord DataRecord::decode_from(Decoder& dec) {
    DataRecord rec;
    rec.pod_id = dec.str();
    rec.payload = decode_record(dec.bytes());
    rec.source_kind = static_cast<SourceKind>(dec.u8());
    if (dec.boolean()) {
        Bytes sig = dec.raw(64);
        Signature s;
        std::copy(sig.begin(), sig.end(), s.begin());
        rec.source_signature = s;
    }
    if (dec.boolean()) rec.signer = dec.str();
    return rec;
}

DataRecord DataRecord::decode(BytesView data) {
    Decoder dec(data);
    DataRecord rec = decode_from(dec);
    dec.expect_done();
    return rec;
}

Signature sign_payload(const KeyPair& signer, const Record& payload) {
    return sign(signer, encode_record(payload));
}

AuthTag authenticate_record(const DataRecord& rec, const SignerRegistry& registry) {
    if (rec.source_kind == SourceKind::Alleged)
        return {Verdict::Alleged, "no verifiable source"};
    if (!rec.source_signature || !rec.signer)
        return {Verdict::Rejected, "signed source kind without signature"};
    auto it = registry.find(*rec.signer);
    if (it == registry.end())
        return {Verdict::Rejected, "unknown signer " + *rec.signer};
    if (!verify(it->second, encode_record(rec.payload), *rec.source_signature))
        return {Verdict::Rejected, "signature verification failed"};
    return {Verdict::Verified, "signature verified against " + *rec.signer};
}

ProverOutput prover_lambda_fn(const std::vector<DataRecord>& batch,
                              const SignerRegistry& registry) {
    ProverOutput out;
    for (const DataRecord& rec : batch) {
        AuthTag tag = authenticate_record(rec, registry);
        switch (tag.verdict) {
            case Verdict::Verified: ++out.summary.verified; break;
            case Verdict::Alleged: ++out.summary.alleged; break;
            case Verdict::Rejected: ++out.summary.rejected; break;
        }
        if (tag.verdict != Verdict::Rejected) out.validated.emplace_back(rec, tag);
    }
    return out;
}

}  // namespace pixiu
