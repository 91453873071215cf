#include "pipeline/config.h"

#include "core/errors.h"
#include "core/jsonio.h"

namespace efc {

namespace {

using nlohmann::json;

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
    fail_usage("unknown config key \"" + section + "." + key + "\"");
}

void apply_plant(BratuParams& p, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "lambda") p.lambda = val.get<double>();
        else if (key == "m") p.m = val.get<int>();
        else if (key == "dt_inner") p.dt_inner = val.get<double>();
        else if (key == "dt_report") p.dt_report = val.get<double>();
        else unknown_key("plant", key);
    }
}

void apply_actuators(ActuatorConfig& a, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "centers") {
            a.centers.clear();
            for (const auto& c : val) a.centers.push_back(c.get<double>());
        } else if (key == "sigma") {
            a.sigma = val.get<double>();
        } else {
            unknown_key("actuators", key);
        }
    }
}

void apply_datagen(DatasetConfig& d, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "n_traj") d.n_traj = val.get<int>();
        else if (key == "steps") d.steps = val.get<int>();
        else if (key == "burn_in") d.burn_in = val.get<int>();
        else if (key == "amp_max") d.amp_max = val.get<double>();
        else if (key == "extra_modes") d.extra_modes = val.get<int>();
        else if (key == "extra_amp") d.extra_amp = val.get<double>();
        else if (key == "state_bound") d.state_bound = val.get<double>();
        else if (key == "max_attempts_factor") d.max_attempts_factor = val.get<int>();
        else unknown_key("datagen", key);
    }
}

void apply_model(RandONetConfig& m, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "n_trunk") m.n_trunk = val.get<int>();
        else if (key == "m_branch") m.m_branch = val.get<int>();
        else if (key == "a_u") m.a_u = val.get<double>();
        else if (key == "eps_rff") m.eps_rff = val.get<double>();
        else if (key == "mu_scale") m.mu_scale = val.get<double>();
        else if (key == "val_fraction") m.val_fraction = val.get<double>();
        else if (key == "split_seed") m.split_seed = val.get<std::uint64_t>();
        else unknown_key("model", key);
    }
}

void apply_krylov(KrylovConfig& k, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "gmres_tol") k.gmres_tol = val.get<double>();
        else if (key == "gmres_restart") k.gmres_restart = val.get<int>();
        else if (key == "gmres_max_iter") k.gmres_max_iter = val.get<int>();
        else if (key == "newton_tol_fd") k.newton_tol_fd = val.get<double>();
        else if (key == "newton_tol_surrogate") k.newton_tol_surrogate = val.get<double>();
        else if (key == "newton_tol_step") k.newton_tol_step = val.get<double>();
        else if (key == "newton_max_iter") k.newton_max_iter = val.get<int>();
        else if (key == "m_k") k.m_k = val.get<int>();
        else if (key == "central_diff") k.central_diff = val.get<bool>();
        else unknown_key("krylov", key);
    }
}

void apply_reduction(ReductionConfig& r, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "m_slow") r.m_slow = val.get<int>();
        else if (key == "d_mode") r.d_mode = val.get<std::string>();
        else if (key == "h_eps") r.h_eps = val.get<double>();
        else unknown_key("reduction", key);
    }
}

void apply_control(ControlConfig& c, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "q_scale") c.q_scale = val.get<double>();
        else if (key == "r_scale") c.r_scale = val.get<double>();
        else if (key == "poles") {
            c.poles.clear();
            for (const auto& p : val) c.poles.push_back(p.get<double>());
        } else if (key == "pole_pad_start") c.pole_pad_start = val.get<double>();
        else if (key == "pole_pad_step") c.pole_pad_step = val.get<double>();
        else if (key == "dare_tol") c.dare_tol = val.get<double>();
        else if (key == "dare_max_iter") c.dare_max_iter = val.get<int>();
        else unknown_key("control", key);
    }
}

void apply_sim(SimConfig& s, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "steps") s.steps = val.get<int>();
        else if (key == "snapshot_every") s.snapshot_every = val.get<int>();
        else if (key == "blow_up") s.blow_up = val.get<double>();
        else if (key == "ic") s.ic = val.get<std::string>();
        else unknown_key("sim", key);
    }
}

void apply_seeds(Seeds& s, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "datagen") s.datagen = val.get<std::uint64_t>();
        else if (key == "model") s.model = val.get<std::uint64_t>();
        else if (key == "control") s.control = val.get<std::uint64_t>();
        else unknown_key("seeds", key);
    }
}

void apply_stage_options(StageOptions& s, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "plant") s.plant = val.get<std::string>();
        else if (key == "method") s.method = val.get<std::string>();
        else if (key == "steps") s.steps = val.get<int>();
        else if (key == "reference") s.reference = val.get<std::string>();
        else if (key == "gain_from") s.gain_from = val.get<std::string>();
        else if (key == "allow_mismatch") s.allow_mismatch = val.get<bool>();
        else if (key == "open_loop") s.open_loop = val.get<bool>();
        else unknown_key("stage_options", key);
    }
}

void apply_sections(PipelineConfig& cfg, const json& j) {
    if (!j.is_object()) fail_usage("config root must be a JSON object");
    for (const auto& [key, val] : j.items()) {
        if (key == "plant") apply_plant(cfg.plant, val);
        else if (key == "actuators") apply_actuators(cfg.actuators, val);
        else if (key == "datagen") apply_datagen(cfg.datagen, val);
        else if (key == "model") apply_model(cfg.model, val);
        else if (key == "krylov") apply_krylov(cfg.krylov, val);
        else if (key == "reduction") apply_reduction(cfg.reduction, val);
        else if (key == "control") apply_control(cfg.control, val);
        else if (key == "sim") apply_sim(cfg.sim, val);
        else if (key == "seeds") apply_seeds(cfg.seeds, val);
        else if (key == "stage_options") apply_stage_options(cfg.stage_options, val);
        else fail_usage("unknown config section \"" + key + "\"");
    }
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
    for (const char* o : options)
        if (v == o) return true;
    return false;
}

}  // namespace

void PipelineConfig::validate() const {
    plant.validate();
    actuators.validate();
    datagen.validate();
    model.validate();
    if (krylov.gmres_tol <= 0 || krylov.newton_tol_fd <= 0 || krylov.newton_tol_surrogate <= 0)
        fail_usage("solver tolerances must be positive");
    if (krylov.m_k < reduction.m_slow) fail_usage("m_k must be at least m_slow");
    if (reduction.m_slow < 1) fail_usage("m_slow must be positive");
    if (!one_of(reduction.d_mode, {"consistent", "paper_vf"}))
        fail_usage("reduction.d_mode must be consistent or paper_vf");
    if (control.q_scale < 0 || control.r_scale <= 0)
        fail_usage("control weights must be positive");
    if (sim.steps < 1 || sim.snapshot_every < 1 || sim.blow_up <= 0)
        fail_usage("sim settings must be positive");
    if (!one_of(sim.ic, {"perturbation", "steady-state"}))
        fail_usage("sim.ic must be perturbation or steady-state");
    if (!one_of(stage_options.plant, {"fd", "surrogate", "both"}))
        fail_usage("stage_options.plant must be fd, surrogate, or both");
    if (!one_of(stage_options.method, {"dlqr", "pp", "both"}))
        fail_usage("stage_options.method must be dlqr, pp, or both");
    if (!stage_options.gain_from.empty() &&
        !one_of(stage_options.gain_from, {"fd", "surrogate"}))
        fail_usage("stage_options.gain_from must be fd or surrogate");
    if (stage_options.steps < 0) fail_usage("stage_options.steps cannot be negative");
}

PipelineConfig config_from_json(const std::string& json_text) {
    PipelineConfig cfg;
    if (!json_text.empty()) {
        json j;
        try {
            j = json::parse(json_text);
        } catch (const json::exception& e) {
            fail_usage(std::string("malformed config JSON: ") + e.what());
        }
        apply_sections(cfg, j);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    PipelineConfig cfg;
    apply_sections(cfg, load_json(path));
    cfg.validate();
    return cfg;
}

void config_set(PipelineConfig& cfg, const std::string& key_path, const std::string& json_value) {
    auto dot = key_path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key_path.size())
        fail_usage("config key must look like section.key: " + key_path);
    json val;
    try {
        val = json::parse(json_value);
    } catch (const json::exception& e) {
        fail_usage("malformed value for " + key_path + ": " + e.what());
    }
    json wrapped;
    wrapped[key_path.substr(0, dot)][key_path.substr(dot + 1)] = val;
    apply_sections(cfg, wrapped);
}

std::string config_to_json(const PipelineConfig& cfg) {
    JsonWriter w;
    w.begin_object();
    w.key("plant");
    w.begin_object();
    w.kv("lambda", cfg.plant.lambda);
    w.kv("m", cfg.plant.m);
    w.kv("dt_inner", cfg.plant.dt_inner);
    w.kv("dt_report", cfg.plant.dt_report);
    w.end_object();
    w.key("actuators");
    w.begin_object();
    w.key("centers");
    w.begin_array();
    for (double c : cfg.actuators.centers) w.value(c);
    w.end_array();
    w.kv("sigma", cfg.actuators.sigma);
    w.end_object();
    w.key("datagen");
    w.begin_object();
    w.kv("n_traj", cfg.datagen.n_traj);
    w.kv("steps", cfg.datagen.steps);
    w.kv("burn_in", cfg.datagen.burn_in);
    w.kv("amp_max", cfg.datagen.amp_max);
    w.kv("extra_modes", cfg.datagen.extra_modes);
    w.kv("extra_amp", cfg.datagen.extra_amp);
    w.kv("state_bound", cfg.datagen.state_bound);
    w.kv("max_attempts_factor", cfg.datagen.max_attempts_factor);
    w.end_object();
    w.key("model");
    w.begin_object();
    w.kv("n_trunk", cfg.model.n_trunk);
    w.kv("m_branch", cfg.model.m_branch);
    w.kv("a_u", cfg.model.a_u);
    w.kv("eps_rff", cfg.model.eps_rff);
    w.kv("mu_scale", cfg.model.mu_scale);
    w.kv("val_fraction", cfg.model.val_fraction);
    w.kv("split_seed", static_cast<std::int64_t>(cfg.model.split_seed));
    w.end_object();
    w.key("krylov");
    w.begin_object();
    w.kv("gmres_tol", cfg.krylov.gmres_tol);
    w.kv("gmres_restart", cfg.krylov.gmres_restart);
    w.kv("gmres_max_iter", cfg.krylov.gmres_max_iter);
    w.kv("newton_tol_fd", cfg.krylov.newton_tol_fd);
    w.kv("newton_tol_surrogate", cfg.krylov.newton_tol_surrogate);
    w.kv("newton_tol_step", cfg.krylov.newton_tol_step);
    w.kv("newton_max_iter", cfg.krylov.newton_max_iter);
    w.kv("m_k", cfg.krylov.m_k);
    w.kv("central_diff", cfg.krylov.central_diff);
    w.end_object();
    w.key("reduction");
    w.begin_object();
    w.kv("m_slow", cfg.reduction.m_slow);
    w.kv("d_mode", cfg.reduction.d_mode);
    w.kv("h_eps", cfg.reduction.h_eps);
    w.end_object();
    w.key("control");
    w.begin_object();
    w.kv("q_scale", cfg.control.q_scale);
    w.kv("r_scale", cfg.control.r_scale);
    w.key("poles");
    w.begin_array();
    for (double p : cfg.control.poles) w.value(p);
    w.end_array();
    w.kv("pole_pad_start", cfg.control.pole_pad_start);
    w.kv("pole_pad_step", cfg.control.pole_pad_step);
    w.kv("dare_tol", cfg.control.dare_tol);
    w.kv("dare_max_iter", cfg.control.dare_max_iter);
    w.end_object();
    w.key("sim");
    w.begin_object();
    w.kv("steps", cfg.sim.steps);
    w.kv("snapshot_every", cfg.sim.snapshot_every);
    w.kv("blow_up", cfg.sim.blow_up);
    w.kv("ic", cfg.sim.ic);
    w.end_object();
    w.key("seeds");
    w.begin_object();
    w.kv("datagen", static_cast<std::int64_t>(cfg.seeds.datagen));
    w.kv("model", static_cast<std::int64_t>(cfg.seeds.model));
    w.kv("control", static_cast<std::int64_t>(cfg.seeds.control));
    w.end_object();
    w.key("stage_options");
    w.begin_object();
    w.kv("plant", cfg.stage_options.plant);
    w.kv("method", cfg.stage_options.method);
    w.kv("steps", cfg.stage_options.steps);
    w.kv("reference", cfg.stage_options.reference);
    w.kv("gain_from", cfg.stage_options.gain_from);
    w.kv("allow_mismatch", cfg.stage_options.allow_mismatch);
    w.kv("open_loop", cfg.stage_options.open_loop);
    w.end_object();
    w.end_object();
    return w.str();
}

}  // namespace efc
