#include "pixiu/plan.hpp"

namespace pixiu {

nlohmann::json PipelinePlan::to_json() const {
    nlohmann::json steps_json = nlohmann::json::array();
    for (const PlanStep& s : steps) {
        steps_json.push_back({
            {"kind", kind_token(s.kind)},
            {"fn_digest", s.expected_fn_digest.hex()},
            {"instance_id", s.instance_id},
        });
    }
    return {{"task_id", task_id_hex(task_id)}, {"steps", steps_json}};
}

PipelinePlan PipelinePlan::from_json(const nlohmann::json& j) {
    PipelinePlan plan;
    plan.task_id = task_id_from_hex(j.at("task_id").get<std::string>());
    for (const auto& s : j.at("steps")) {
        PlanStep step;
        auto kind = kind_from_token(s.at("kind").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown kind in plan file");
        step.kind = *kind;
        step.expected_fn_digest = Digest::from_hex(s.at("fn_digest").get<std::string>());
        step.instance_id = s.value("instance_id", "");
        plan.steps.push_back(std::move(step));
    }
    return plan;
}

}  // namespace pixiu
