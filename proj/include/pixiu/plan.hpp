#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixiu/proof.hpp"

namespace pixiu {

// instance key id -> verification key
using InstanceRegistry = std::map<std::string, PublicKey>;

struct PlanStep {
    LambdaKind kind = LambdaKind::DataProver;
    Digest expected_fn_digest;
    std::string instance_id;  // empty until recruited
};

// The agreed sequence of lambda kinds with expected function digests and
// recruited instances. Edge i carries traffic into step i; edge |steps| is the
// consumer egress. Published (without the task source) so any participant can
// verify the proof chain.
struct PipelinePlan {
    TaskId task_id{};
    std::vector<PlanStep> steps;

    size_t edge_count() const { return steps.size() + 1; }

    nlohmann::json to_json() const;
    static PipelinePlan from_json(const nlohmann::json& j);
};

}  // namespace pixiu
