// Python bindings for the pipeline core: hashing and signing primitives, the
// task DSL, the DP release functions, and the scenario/verify/trace drivers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <memory>

#include "json.hpp"
#include "pixiu/scenario.hpp"

namespace py = pybind11;
using namespace pixiu;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
    std::string dumped = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(dumped);
}

RecordList records_from_py(const py::object& batch) {
    nlohmann::json j = py_to_json(batch);
    if (!j.is_array()) throw std::invalid_argument("batch must be a list of records");
    Value v = value_from_json(j);
    if (v.is_vec() || !v.is_list()) throw std::invalid_argument("batch must hold objects");
    return v.as_list();
}

// Same pinning the CLI applies: the plan names the recruited instances, and an
// instance id is the hex of its verification key.
InstanceRegistry registry_from_plan(const PipelinePlan& plan) {
    InstanceRegistry registry;
    for (const PlanStep& step : plan.steps)
        if (!step.instance_id.empty())
            registry.emplace(step.instance_id, public_key_from_hex(step.instance_id));
    return registry;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

}  // namespace

PYBIND11_MODULE(pixiu, m) {
    m.doc() = "trust-lambda pipeline simulator: task DSL, DP release, proof chains";

    // hashing and signatures
    m.def("sha256_hex", [](py::bytes data) {
        std::string s = data;
        return sha256(to_bytes(s)).hex();
    });
    m.def("keypair_from_seed", [](py::bytes seed) {
        std::string s = seed;
        if (s.size() != 32) throw std::invalid_argument("seed must be 32 bytes");
        std::array<uint8_t, 32> a;
        std::copy(s.begin(), s.end(), a.begin());
        KeyPair kp = KeyPair::from_seed(a);
        return py::make_tuple(hex_encode(BytesView(kp.pub.data(), kp.pub.size())),
                              hex_encode(BytesView(kp.secret.data(), kp.secret.size())));
    });
    m.def("sign_message", [](py::bytes seed, py::bytes msg) {
        std::string s = seed, text = msg;
        if (s.size() != 32) throw std::invalid_argument("seed must be 32 bytes");
        std::array<uint8_t, 32> a;
        std::copy(s.begin(), s.end(), a.begin());
        Signature sig = sign(KeyPair::from_seed(a), to_bytes(text));
        return hex_encode(BytesView(sig.data(), sig.size()));
    });
    m.def("verify_message", [](const std::string& pub_hex, py::bytes msg,
                               const std::string& sig_hex) {
        std::string text = msg;
        Bytes sig_bytes = hex_decode(sig_hex);
        if (sig_bytes.size() != 64) return false;
        Signature sig;
        std::copy(sig_bytes.begin(), sig_bytes.end(), sig.begin());
        return verify(public_key_from_hex(pub_hex), to_bytes(text), sig);
    });

    // task DSL
    m.def("parse_task", [](const std::string& source) {
        return taskdsl::print(taskdsl::parse(source));
    });
    m.def("task_fn_digest", [](const std::string& source) {
        return taskdsl::fn_digest(taskdsl::parse(source)).hex();
    });
    m.def("eval_task", [](const std::string& source, const py::object& batch) {
        taskdsl::ExprPtr expr = taskdsl::parse(source);
        return json_to_py(value_to_json(taskdsl::eval_batch(expr, records_from_py(batch))));
    });

    // differential privacy
    m.def("laplace_sample", &dp::laplace_sample, py::arg("scale"), py::arg("u"));
    m.def(
        "dp_count",
        [](int64_t count, double epsilon, double sensitivity, std::optional<uint64_t> seed) {
            dp::PrivacyParams params{epsilon, sensitivity};
            dp::NoiseSource noise =
                seed ? dp::seeded_noise(std::make_shared<DetRng>(*seed)) : dp::zero_noise();
            return dp::dp_count(count, params, noise);
        },
        py::arg("count"), py::arg("epsilon"), py::arg("sensitivity") = 1.0,
        py::arg("seed") = py::none());
    m.def(
        "dp_sum",
        [](double clipped_sum, double clip_lo, double clip_hi, double epsilon,
           std::optional<uint64_t> seed) {
            dp::PrivacyParams params{epsilon, clip_hi - clip_lo};
            dp::NoiseSource noise =
                seed ? dp::seeded_noise(std::make_shared<DetRng>(*seed)) : dp::zero_noise();
            return dp::dp_sum(clipped_sum, clip_lo, clip_hi, params, noise);
        },
        py::arg("clipped_sum"), py::arg("clip_lo"), py::arg("clip_hi"), py::arg("epsilon"),
        py::arg("seed") = py::none());

    // scenario driver
    m.def(
        "run_scenario",
        [](const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
           std::optional<uint64_t> seed, bool zero_noise) {
            ScenarioConfig config = ScenarioConfig::load(config_path);
            if (seed) config.seed = *seed;
            ScenarioRun run = run_scenario(config, out_dir, zero_noise);
            nlohmann::json result = load_json_file(run.result_path);
            result["log"] = run.log_path.string();
            result["attack_cost"] = run.attack_cost;
            return json_to_py(result);
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("seed") = py::none(),
        py::arg("zero_noise") = false);

    m.def(
        "verify_log",
        [](const std::filesystem::path& log_path, std::optional<std::filesystem::path> plan_path) {
            std::filesystem::path plan_file =
                plan_path ? *plan_path : log_path.parent_path() / "plan.json";
            PipelinePlan plan = PipelinePlan::from_json(load_json_file(plan_file));
            ProofLog log(log_path);
            return json_to_py(
                verify_chain(log, plan.task_id, plan, registry_from_plan(plan)).to_json());
        },
        py::arg("log_path"), py::arg("plan_path") = py::none());

    m.def("trace", [](const std::filesystem::path& log_path, const std::string& digest_hex) {
        ProofLog log(log_path);
        return json_to_py(trace_lineage(log, Digest::from_hex(digest_hex)).to_json());
    });

    py::register_exception<taskdsl::SyntaxError>(m, "TaskSyntaxError", PyExc_ValueError);
    py::register_exception<UnknownDigest>(m, "UnknownDigestError", PyExc_KeyError);
    py::register_exception<StepFailed>(m, "StepFailedError", PyExc_RuntimeError);
}
