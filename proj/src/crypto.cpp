#include "pixiu/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

#include "pixiu/codec.hpp"

namespace pixiu {

static void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw CryptoError("sodium_init failed");
    });
}

std::string Digest::hex() const {
    return hex_encode(view());
}

Digest Digest::from_hex(std::string_view hex) {
    Bytes raw = hex_decode(hex);
    if (raw.size() != 32) throw std::invalid_argument("digest must be 32 bytes");
    Digest d;
    std::memcpy(d.bytes.data(), raw.data(), 32);
    return d;
}

Digest sha256(BytesView data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

std::string key_id(const PublicKey& pk) {
    return hex_encode(BytesView(pk.data(), pk.size()));
}

PublicKey public_key_from_hex(std::string_view hex) {
    Bytes raw = hex_decode(hex);
    if (raw.size() != 32) throw std::invalid_argument("public key must be 32 bytes");
    PublicKey pk;
    std::memcpy(pk.data(), raw.data(), 32);
    return pk;
}

KeyPair KeyPair::from_seed(const std::array<uint8_t, 32>& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pub.data(), kp.secret.data(), seed.data());
    return kp;
}

Signature sign(const KeyPair& key, BytesView msg) {
    ensure_sodium();
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), key.secret.data());
    return sig;
}

bool verify(const PublicKey& pub, BytesView msg, const Signature& sig) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pub.data()) == 0;
}

void DetRng::fill(uint8_t* out, size_t n) {
    size_t i = 0;
    while (i < n) {
        uint64_t v = gen_();
        for (int b = 0; b < 8 && i < n; ++b, ++i) {
            out[i] = static_cast<uint8_t>(v >> (8 * b));
        }
    }
}

double DetRng::uniform_open() {
    // 53-bit mantissa in [0,1), shifted; reject the closed endpoint.
    for (;;) {
        double u = (gen_() >> 11) * 0x1.0p-53 - 0.5;
        if (u > -0.5) return u;
    }
}

DetRng DetRng::fork() {
    return DetRng(gen_());
}

// --- asymmetric sealing ---

static std::array<uint8_t, 32> ed25519_pk_to_x25519(const PublicKey& pk) {
    std::array<uint8_t, 32> x;
    if (crypto_sign_ed25519_pk_to_curve25519(x.data(), pk.data()) != 0)
        throw CryptoError("invalid recipient key");
    return x;
}

static std::array<uint8_t, 32> ed25519_sk_to_x25519(const KeyPair& kp) {
    std::array<uint8_t, 32> x;
    if (crypto_sign_ed25519_sk_to_curve25519(x.data(), kp.secret.data()) != 0)
        throw CryptoError("invalid secret key");
    return x;
}

static std::array<uint8_t, crypto_box_NONCEBYTES> box_nonce(const uint8_t* epk,
                                                            const uint8_t* rpk) {
    std::array<uint8_t, crypto_box_NONCEBYTES> nonce;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, nonce.size());
    crypto_generichash_update(&st, epk, 32);
    crypto_generichash_update(&st, rpk, 32);
    crypto_generichash_final(&st, nonce.data(), nonce.size());
    return nonce;
}

Bytes SealedBlob::encode() const {
    Encoder enc;
    enc.str(recipient);
    enc.raw(BytesView(ephemeral.data(), ephemeral.size()));
    enc.bytes(ciphertext);
    return enc.take();
}

SealedBlob SealedBlob::decode(BytesView data) {
    Decoder dec(data);
    SealedBlob b;
    b.recipient = dec.str();
    Bytes eph = dec.raw(32);
    std::memcpy(b.ephemeral.data(), eph.data(), 32);
    b.ciphertext = dec.bytes();
    dec.expect_done();
    return b;
}

SealedBlob seal_to(DetRng& rng, const PublicKey& recipient, BytesView plaintext) {
    ensure_sodium();
    auto rpk = ed25519_pk_to_x25519(recipient);

    std::array<uint8_t, 32> eph_seed = rng.array<32>();
    std::array<uint8_t, 32> eph_pk, eph_sk;
    crypto_box_seed_keypair(eph_pk.data(), eph_sk.data(), eph_seed.data());

    auto nonce = box_nonce(eph_pk.data(), rpk.data());

    SealedBlob blob;
    blob.recipient = key_id(recipient);
    blob.ephemeral = eph_pk;
    blob.ciphertext.resize(plaintext.size() + crypto_box_MACBYTES);
    if (crypto_box_easy(blob.ciphertext.data(), plaintext.data(), plaintext.size(), nonce.data(),
                        rpk.data(), eph_sk.data()) != 0)
        throw CryptoError("crypto_box_easy failed");
    sodium_memzero(eph_sk.data(), eph_sk.size());
    return blob;
}

Bytes unseal(const KeyPair& recipient, const SealedBlob& blob) {
    ensure_sodium();
    if (blob.ciphertext.size() < crypto_box_MACBYTES) throw AuthFailure("ciphertext too short");
    auto rsk = ed25519_sk_to_x25519(recipient);
    auto rpk = ed25519_pk_to_x25519(recipient.pub);
    auto nonce = box_nonce(blob.ephemeral.data(), rpk.data());

    Bytes plain(blob.ciphertext.size() - crypto_box_MACBYTES);
    if (crypto_box_open_easy(plain.data(), blob.ciphertext.data(), blob.ciphertext.size(),
                             nonce.data(), blob.ephemeral.data(), rsk.data()) != 0)
        throw AuthFailure("unseal: authentication failed");
    return plain;
}

// --- symmetric sealing ---

Bytes SymSealed::encode() const {
    Encoder enc;
    enc.raw(BytesView(nonce.data(), nonce.size()));
    enc.bytes(ciphertext);
    return enc.take();
}

SymSealed SymSealed::decode(BytesView data) {
    Decoder dec(data);
    SymSealed b;
    Bytes n = dec.raw(12);
    std::memcpy(b.nonce.data(), n.data(), 12);
    b.ciphertext = dec.bytes();
    dec.expect_done();
    return b;
}

SymSealed sym_seal(DetRng& rng, const SymKey& key, BytesView plaintext) {
    ensure_sodium();
    SymSealed blob;
    blob.nonce = rng.array<12>();
    blob.ciphertext.resize(plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long clen = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(blob.ciphertext.data(), &clen, plaintext.data(),
                                              plaintext.size(), nullptr, 0, nullptr,
                                              blob.nonce.data(), key.data());
    blob.ciphertext.resize(clen);
    return blob;
}

Bytes sym_unseal(const SymKey& key, const SymSealed& blob) {
    ensure_sodium();
    if (blob.ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES)
        throw AuthFailure("ciphertext too short");
    Bytes plain(blob.ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long plen = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &plen, nullptr,
                                                  blob.ciphertext.data(), blob.ciphertext.size(),
                                                  nullptr, 0, blob.nonce.data(), key.data()) != 0)
        throw AuthFailure("sym_unseal: authentication failed");
    plain.resize(plen);
    return plain;
}

// --- attestation ---

std::string to_string(SecurityLevel level) {
    return level == SecurityLevel::HighAssurance ? "high_assurance" : "mid_level";
}

Bytes AttestationReport::signed_body() const {
    Encoder enc;
    enc.str(instance_id);
    enc.raw(measurement.view());
    enc.u8(static_cast<uint8_t>(security_level));
    return enc.take();
}

ManufacturerRoot::ManufacturerRoot(DetRng& rng) : root_(KeyPair::from_seed(rng.array<32>())) {}

void ManufacturerRoot::register_instance(const PublicKey& instance, SecurityLevel level) {
    registered_[key_id(instance)] = level;
}

bool ManufacturerRoot::is_registered(const std::string& instance_id) const {
    return registered_.count(instance_id) > 0;
}

AttestationReport ManufacturerRoot::attest(const std::string& instance_id,
                                           const Digest& measurement) const {
    auto it = registered_.find(instance_id);
    if (it == registered_.end())
        throw AttestationUnavailable("instance not registered: " + instance_id);
    AttestationReport report;
    report.instance_id = instance_id;
    report.measurement = measurement;
    report.security_level = it->second;
    report.root_signature = sign(root_, report.signed_body());
    return report;
}

bool ManufacturerRoot::check(const AttestationReport& report,
                             const Digest& expected_measurement) const {
    if (report.measurement != expected_measurement) return false;
    return verify(root_.pub, report.signed_body(), report.root_signature);
}

}  // namespace pixiu
