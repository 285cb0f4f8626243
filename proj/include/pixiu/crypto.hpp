#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "pixiu/bytes.hpp"

namespace pixiu {

struct CryptoError : std::runtime_error {
    explicit CryptoError(const std::string& what) : std::runtime_error(what) {}
};

// Unseal/verify with the wrong key, or tampered ciphertext.
struct AuthFailure : CryptoError {
    explicit AuthFailure(const std::string& what) : CryptoError(what) {}
};

struct Digest {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    std::string hex() const;
    static Digest from_hex(std::string_view hex);
    static Digest zero() { return Digest{}; }
    bool is_zero() const { return *this == Digest{}; }

    BytesView view() const { return BytesView(bytes.data(), bytes.size()); }
};

Digest sha256(BytesView data);

using PublicKey = std::array<uint8_t, 32>;   // Ed25519 verification key
using Signature = std::array<uint8_t, 64>;
using SymKey = std::array<uint8_t, 32>;      // AEAD key for pipeline edges

std::string key_id(const PublicKey& pk);  // lowercase hex
PublicKey public_key_from_hex(std::string_view hex);

struct KeyPair {
    PublicKey pub{};
    std::array<uint8_t, 64> secret{};

    static KeyPair from_seed(const std::array<uint8_t, 32>& seed);
};

Signature sign(const KeyPair& key, BytesView msg);
bool verify(const PublicKey& pub, BytesView msg, const Signature& sig);

// Deterministic stream of randomness for one simulation run. Everything that
// influences on-disk artifacts (keys, nonces, noise, data shuffles) draws from
// here so that identical seeds reproduce identical runs.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    void fill(uint8_t* out, size_t n);

    template <size_t N>
    std::array<uint8_t, N> array() {
        std::array<uint8_t, N> a;
        fill(a.data(), N);
        return a;
    }

    // Uniform in the open interval (-1/2, 1/2).
    double uniform_open();

    // Derive an independent child stream (for per-node key material).
    DetRng fork();

private:
    std::mt19937_64 gen_;
};

// Asymmetric sealing to a recipient's key: X25519 box with an ephemeral sender
// key, recipient keys derived from the Ed25519 identity. Used for key-chain
// distribution, task-code delivery, and per-POD result envelopes.
struct SealedBlob {
    std::string recipient;                 // key id of intended recipient
    std::array<uint8_t, 32> ephemeral{};   // sender's one-shot X25519 public key
    Bytes ciphertext;                      // authenticated

    Bytes encode() const;
    static SealedBlob decode(BytesView data);
};

SealedBlob seal_to(DetRng& rng, const PublicKey& recipient, BytesView plaintext);
Bytes unseal(const KeyPair& recipient, const SealedBlob& blob);  // throws AuthFailure

// Symmetric sealing under a pipeline edge key (IETF ChaCha20-Poly1305).
struct SymSealed {
    std::array<uint8_t, 12> nonce{};
    Bytes ciphertext;

    Bytes encode() const;
    static SymSealed decode(BytesView data);
};

SymSealed sym_seal(DetRng& rng, const SymKey& key, BytesView plaintext);
Bytes sym_unseal(const SymKey& key, const SymSealed& blob);  // throws AuthFailure

enum class SecurityLevel : uint8_t { MidLevel = 0, HighAssurance = 1 };

std::string to_string(SecurityLevel level);

struct AttestationReport {
    std::string instance_id;
    Digest measurement;       // digest of the lambda runtime + function
    SecurityLevel security_level = SecurityLevel::MidLevel;
    Signature root_signature{};

    Bytes signed_body() const;
};

struct AttestationUnavailable : CryptoError {
    explicit AttestationUnavailable(const std::string& what) : CryptoError(what) {}
};

// Single in-process stand-in for the TEE manufacturer's root of trust.
// Instances register their keys when the node joins; attest() issues a
// root-signed statement binding the instance key to its measurement.
class ManufacturerRoot {
public:
    explicit ManufacturerRoot(DetRng& rng);

    const PublicKey& root_public() const { return root_.pub; }

    void register_instance(const PublicKey& instance, SecurityLevel level);
    bool is_registered(const std::string& instance_id) const;

    AttestationReport attest(const std::string& instance_id, const Digest& measurement) const;

    bool check(const AttestationReport& report, const Digest& expected_measurement) const;

private:
    KeyPair root_;
    std::map<std::string, SecurityLevel> registered_;
};

}  // namespace pixiu
