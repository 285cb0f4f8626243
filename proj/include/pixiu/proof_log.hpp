#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixiu/data_prover.hpp"
#include "pixiu/plan.hpp"
#include "pixiu/proof.hpp"

namespace pixiu {

struct InvalidSignature : std::runtime_error {
    explicit InvalidSignature(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownTask : std::runtime_error {
    explicit UnknownTask(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownDigest : std::runtime_error {
    explicit UnknownDigest(const std::string& what) : std::runtime_error(what) {}
};

// The append-only public storage of execution proofs: one proof per line.
// A sidecar file (<path>.leaves) carries the per-task input leaf digests and
// prover verdict summary used by lineage tracing.
class ProofLog {
public:
    explicit ProofLog(std::filesystem::path path);

    const std::filesystem::path& path() const { return path_; }

    // Rejects proofs whose signature does not verify against the registry.
    // Returns the line index.
    size_t append(const ExecutionProof& proof, const InstanceRegistry& registry);

    // Unchecked write path: the storage substrate is untrusted, so a malicious
    // host can put arbitrary lines in the file. verify_chain must catch these.
    size_t raw_append_line(const std::string& line);

    size_t size() const { return lines_.size(); }
    const std::vector<std::string>& lines() const { return lines_; }

    struct LeavesEntry {
        std::vector<Digest> pod_batch_digests;
        VerdictSummary auth_summary;
    };

    void record_leaves(const TaskId& task_id, const LeavesEntry& entry);
    std::optional<LeavesEntry> leaves_for(const TaskId& task_id) const;

private:
    void persist_line(const std::string& line);

    std::filesystem::path path_;
    std::vector<std::string> lines_;
    std::map<std::string, LeavesEntry> leaves_;  // task id hex -> entry
};

enum class StepVerdict : uint8_t {
    Ok = 0,
    BadSignature,
    BrokenLink,
    WrongFunction,
    MissingProof,
    FailedStep,
};

std::string to_string(StepVerdict v);

struct VerificationReport {
    TaskId task_id{};
    struct Step {
        StepVerdict verdict = StepVerdict::Ok;
        std::string detail;
    };
    std::vector<Step> steps;
    std::optional<uint32_t> first_bad_step;

    bool all_ok() const { return !first_bad_step.has_value(); }
    nlohmann::json to_json() const;
    std::string render_text() const;
};

// Checks, per step and in order: signature, back-link and input/output hash
// linkage, expected function digest, presence. Pure in (log bytes, plan,
// registry): every honest party computes the same report.
VerificationReport verify_chain(const ProofLog& log, const TaskId& task_id,
                                const PipelinePlan& expected_plan,
                                const InstanceRegistry& registry);

struct LineageTree {
    Digest root;
    struct Node {
        size_t line_index;
        ExecutionProof proof;
    };
    std::vector<Node> chain;      // from the producing step down to genesis
    std::vector<Digest> leaves;   // POD batch digests
    VerdictSummary auth_summary;  // prover verdicts over the leaves

    std::string render_text() const;
    nlohmann::json to_json() const;
};

LineageTree trace_lineage(const ProofLog& log, const Digest& output_digest);

}  // namespace pixiu
