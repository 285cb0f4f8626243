#include "pixiu/proof_log.hpp"

#include <fstream>
#include <sstream>

namespace pixiu {

ProofLog::ProofLog(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines_.push_back(line);
    }
    std::ifstream leaves_in(path_.string() + ".leaves");
    while (std::getline(leaves_in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        LeavesEntry entry;
        for (const auto& d : j.at("pod_batch_digests"))
            entry.pod_batch_digests.push_back(Digest::from_hex(d.get<std::string>()));
        entry.auth_summary.verified = j.at("auth_summary").at("verified").get<uint32_t>();
        entry.auth_summary.alleged = j.at("auth_summary").at("alleged").get<uint32_t>();
        entry.auth_summary.rejected = j.at("auth_summary").at("rejected").get<uint32_t>();
        leaves_[j.at("task_id").get<std::string>()] = std::move(entry);
    }
}

void ProofLog::persist_line(const std::string& line) {
    std::ofstream out(path_, std::ios::app);
    out << line << '\n';
    out.flush();
}

size_t ProofLog::append(const ExecutionProof& proof, const InstanceRegistry& registry) {
    auto it = registry.find(proof.signer);
    if (it == registry.end())
        throw InvalidSignature("proof signer not in registry: " + proof.signer);
    if (!verify_proof_signature(it->second, proof))
        throw InvalidSignature("proof signature does not verify");
    return raw_append_line(proof.render_line());
}

size_t ProofLog::raw_append_line(const std::string& line) {
    persist_line(line);
    lines_.push_back(line);
    return lines_.size() - 1;
}

void ProofLog::record_leaves(const TaskId& task_id, const LeavesEntry& entry) {
    nlohmann::json digests = nlohmann::json::array();
    for (const Digest& d : entry.pod_batch_digests) digests.push_back(d.hex());
    nlohmann::json j = {
        {"task_id", task_id_hex(task_id)},
        {"pod_batch_digests", digests},
        {"auth_summary",
         {{"verified", entry.auth_summary.verified},
          {"alleged", entry.auth_summary.alleged},
          {"rejected", entry.auth_summary.rejected}}},
    };
    std::ofstream out(path_.string() + ".leaves", std::ios::app);
    out << j.dump() << '\n';
    leaves_[task_id_hex(task_id)] = entry;
}

std::optional<ProofLog::LeavesEntry> ProofLog::leaves_for(const TaskId& task_id) const {
    auto it = leaves_.find(task_id_hex(task_id));
    if (it == leaves_.end()) return std::nullopt;
    return it->second;
}

std::string to_string(StepVerdict v) {
    switch (v) {
        case StepVerdict::Ok: return "ok";
        case StepVerdict::BadSignature: return "bad_signature";
        case StepVerdict::BrokenLink: return "broken_link";
        case StepVerdict::WrongFunction: return "wrong_function";
        case StepVerdict::MissingProof: return "missing_proof";
        case StepVerdict::FailedStep: return "failed_step";
    }
    return "?";
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json steps_json = nlohmann::json::array();
    for (const Step& s : steps)
        steps_json.push_back({{"verdict", to_string(s.verdict)}, {"detail", s.detail}});
    nlohmann::json j = {{"task_id", task_id_hex(task_id)}, {"steps", steps_json}};
    if (first_bad_step)
        j["first_bad_step"] = *first_bad_step;
    else
        j["first_bad_step"] = nullptr;
    return j;
}

std::string VerificationReport::render_text() const {
    std::ostringstream os;
    os << "task " << task_id_hex(task_id) << "\n";
    for (size_t i = 0; i < steps.size(); ++i) {
        os << "  step " << i << ": " << to_string(steps[i].verdict);
        if (!steps[i].detail.empty()) os << " (" << steps[i].detail << ")";
        os << "\n";
    }
    if (first_bad_step)
        os << "first bad step: " << *first_bad_step << "\n";
    else
        os << "all steps ok\n";
    return os.str();
}

namespace {

struct TaskLine {
    size_t line_index;
    ExecutionProof proof;
    bool parse_ok;
};

std::vector<TaskLine> collect_task_lines(const ProofLog& log, const TaskId& task_id) {
    std::vector<TaskLine> out;
    std::string id_hex = task_id_hex(task_id);
    for (size_t i = 0; i < log.lines().size(); ++i) {
        const std::string& line = log.lines()[i];
        if (line.compare(0, id_hex.size(), id_hex) != 0) continue;
        TaskLine tl;
        tl.line_index = i;
        try {
            tl.proof = ExecutionProof::parse_line(line);
            tl.parse_ok = true;
        } catch (const std::exception&) {
            tl.parse_ok = false;
        }
        out.push_back(std::move(tl));
    }
    return out;
}

}  // namespace

VerificationReport verify_chain(const ProofLog& log, const TaskId& task_id,
                                const PipelinePlan& expected_plan,
                                const InstanceRegistry& registry) {
    auto lines = collect_task_lines(log, task_id);
    if (lines.empty()) throw UnknownTask("no proofs for task " + task_id_hex(task_id));

    VerificationReport report;
    report.task_id = task_id;
    report.steps.resize(expected_plan.steps.size());

    // First committed proof per step index wins; later duplicates cannot
    // retroactively repair or break an already-verified prefix.
    std::vector<const TaskLine*> by_step(expected_plan.steps.size(), nullptr);
    for (const TaskLine& tl : lines) {
        if (!tl.parse_ok) continue;
        if (tl.proof.step_index >= by_step.size()) continue;
        if (!by_step[tl.proof.step_index]) by_step[tl.proof.step_index] = &tl;
    }

    const ExecutionProof* prev = nullptr;
    bool halted = false;
    for (size_t s = 0; s < expected_plan.steps.size(); ++s) {
        auto& out = report.steps[s];
        const TaskLine* tl = by_step[s];
        if (!tl) {
            out.verdict = StepVerdict::MissingProof;
            out.detail = halted ? "pipeline halted earlier" : "no proof committed";
            continue;
        }
        const ExecutionProof& p = tl->proof;

        if (!expected_plan.steps[s].instance_id.empty() &&
            p.signer != expected_plan.steps[s].instance_id) {
            out.verdict = StepVerdict::BadSignature;
            out.detail = "signer is not the recruited instance";
            prev = &p;
            continue;
        }
        auto signer_it = registry.find(p.signer);
        if (signer_it == registry.end() || !verify_proof_signature(signer_it->second, p)) {
            out.verdict = StepVerdict::BadSignature;
            out.detail = signer_it == registry.end() ? "unknown signer" : "signature invalid";
            prev = &p;
            continue;
        }

        if (s == 0) {
            if (!p.prev_proof_digest.is_zero()) {
                out.verdict = StepVerdict::BrokenLink;
                out.detail = "genesis back-link not zero";
                prev = &p;
                continue;
            }
        } else if (prev == nullptr) {
            out.verdict = StepVerdict::BrokenLink;
            out.detail = "predecessor proof missing";
            prev = &p;
            continue;
        } else {
            if (p.prev_proof_digest != prev->proof_digest()) {
                out.verdict = StepVerdict::BrokenLink;
                out.detail = "back-link does not match predecessor proof digest";
                prev = &p;
                continue;
            }
            if (!p.is_failure() && p.input_digest != prev->output_digest) {
                out.verdict = StepVerdict::BrokenLink;
                out.detail = "input digest does not match predecessor output";
                prev = &p;
                continue;
            }
        }

        if (p.fn_digest != expected_plan.steps[s].expected_fn_digest) {
            out.verdict = StepVerdict::WrongFunction;
            out.detail = "function digest differs from plan";
            prev = &p;
            continue;
        }

        if (p.is_failure()) {
            out.verdict = StepVerdict::FailedStep;
            out.detail = *p.failure_reason;
            halted = true;
            prev = &p;
            continue;
        }

        out.verdict = StepVerdict::Ok;
        prev = &p;
    }

    for (uint32_t s = 0; s < report.steps.size(); ++s) {
        if (report.steps[s].verdict != StepVerdict::Ok) {
            report.first_bad_step = s;
            break;
        }
    }
    return report;
}

LineageTree trace_lineage(const ProofLog& log, const Digest& output_digest) {
    // Find the proof that produced this digest, scanning all tasks.
    for (size_t i = 0; i < log.lines().size(); ++i) {
        ExecutionProof p;
        try {
            p = ExecutionProof::parse_line(log.lines()[i]);
        } catch (const std::exception&) {
            continue;
        }
        if (p.output_digest != output_digest || p.is_failure()) continue;

        LineageTree tree;
        tree.root = output_digest;
        tree.chain.push_back({i, p});

        // Walk back-links to genesis within this task.
        auto lines = collect_task_lines(log, p.task_id);
        ExecutionProof cur = p;
        while (!cur.prev_proof_digest.is_zero()) {
            bool found = false;
            for (const TaskLine& tl : lines) {
                if (!tl.parse_ok) continue;
                if (tl.proof.proof_digest() == cur.prev_proof_digest) {
                    tree.chain.push_back({tl.line_index, tl.proof});
                    cur = tl.proof;
                    found = true;
                    break;
                }
            }
            if (!found)
                throw UnknownDigest("lineage chain broken at step " +
                                    std::to_string(cur.step_index));
        }

        if (auto leaves = log.leaves_for(p.task_id)) {
            tree.leaves = leaves->pod_batch_digests;
            tree.auth_summary = leaves->auth_summary;
        }
        return tree;
    }
    throw UnknownDigest("digest not produced by any logged proof: " + output_digest.hex());
}

std::string LineageTree::render_text() const {
    std::ostringstream os;
    os << "output " << root.hex() << "\n";
    std::string indent = "  ";
    for (const Node& node : chain) {
        os << indent << "step " << node.proof.step_index << " [" << kind_token(node.proof.kind)
           << "] line " << node.line_index << " in=" << node.proof.input_digest.hex()
           << " out=" << node.proof.output_digest.hex() << "\n";
        indent += "  ";
    }
    os << indent << "inputs (" << leaves.size() << " POD batches; verified="
       << auth_summary.verified << " alleged=" << auth_summary.alleged
       << " rejected=" << auth_summary.rejected << "):\n";
    for (const Digest& d : leaves) os << indent << "  " << d.hex() << "\n";
    return os.str();
}

nlohmann::json LineageTree::to_json() const {
    nlohmann::json chain_json = nlohmann::json::array();
    for (const Node& node : chain) {
        chain_json.push_back({
            {"line_index", node.line_index},
            {"step_index", node.proof.step_index},
            {"kind", kind_token(node.proof.kind)},
            {"input_digest", node.proof.input_digest.hex()},
            {"output_digest", node.proof.output_digest.hex()},
        });
    }
    nlohmann::json leaves_json = nlohmann::json::array();
    for (const Digest& d : leaves) leaves_json.push_back(d.hex());
    return {
        {"root", root.hex()},
        {"chain", chain_json},
        {"leaves", leaves_json},
        {"auth_summary",
         {{"verified", auth_summary.verified},
          {"alleged", auth_summary.alleged},
          {"rejected", auth_summary.rejected}}},
    };
}

}  // namespace pixiu
