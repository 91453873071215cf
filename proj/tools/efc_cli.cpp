// Command-line front end for the equation-free control pipeline. Talks to the
// library exclusively through the C API so it doubles as a usage example.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efc/efc.h"

namespace {

struct Override {
    std::string key;
    std::string value;  // JSON text
};

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

// --set values are passed through when they already look like JSON, otherwise
// treated as strings so `--set reduction.d_mode=paper_vf` works unquoted.
std::string as_json_value(const std::string& v) {
    if (v.empty()) return "\"\"";
    char c = v[0];
    if (c == '-' || c == '[' || c == '{' || c == '"' || (c >= '0' && c <= '9')) return v;
    if (v == "true" || v == "false" || v == "null") return v;
    return quote(v);
}

std::string joined_list(const std::vector<double>& xs) {
    std::ostringstream out;
    out.precision(17);
    out << "[";
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out << ",";
        out << xs[i];
    }
    out << "]";
    return out.str();
}

int fail(const std::string& msg, int code) {
    std::cerr << "error: " << msg << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"equation-free steady-state control for a 1D reaction-diffusion plant"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(efc_version()));

    std::string config_path, run_dir;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file; defaults used when omitted")
        ->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override one config field, e.g. --set seeds.model=42")
        ->take_all();

    struct StageSpec {
        CLI::App* cmd;
        std::string name;
    };
    std::vector<StageSpec> stages;
    for (const char* name : {"gen-data", "train", "steady-state", "spectrum", "reduce", "design",
                             "simulate", "pipeline", "report"}) {
        CLI::App* cmd = app.add_subcommand(name, "");
        cmd->add_option("--run-dir", run_dir, "artifact directory")->required();
        stages.push_back({cmd, name});
    }
    auto by_name = [&](const std::string& n) -> CLI::App* {
        for (auto& s : stages)
            if (s.name == n) return s.cmd;
        return nullptr;
    };

    std::uint64_t seed_datagen = 0, seed_model = 0, seed_control = 0;
    bool has_seed_datagen = false, has_seed_model = false, has_seed_control = false;
    by_name("gen-data")->add_option("--seed", seed_datagen, "trajectory sampling seed")
        ->each([&](const std::string&) { has_seed_datagen = true; });
    by_name("train")->add_option("--seed", seed_model, "feature drawing seed")
        ->each([&](const std::string&) { has_seed_model = true; });
    by_name("design")->add_option("--seed", seed_control, "pole placement seed")
        ->each([&](const std::string&) { has_seed_control = true; });

    std::string plant, method, reference, gain_from;
    for (const char* n : {"steady-state", "spectrum", "reduce", "simulate"})
        by_name(n)->add_option("--plant", plant, "fd, surrogate, or both");
    by_name("design")->add_option("--plant", plant, "fd, surrogate, or both");
    for (const char* n : {"design", "simulate"})
        by_name(n)->add_option("--method", method, "dlqr, pp, or both");

    std::vector<double> poles;
    by_name("design")->add_option("--poles", poles, "target closed-loop poles")->delimiter(',');

    int sim_steps = 0;
    bool allow_mismatch = false, open_loop = false;
    auto* sim = by_name("simulate");
    sim->add_option("--steps", sim_steps, "override the simulation horizon");
    sim->add_option("--reference", reference, "steady-state artifact used as the error reference");
    sim->add_option("--gain-from", gain_from, "apply the gain designed on this plant kind");
    sim->add_flag("--allow-mismatch", allow_mismatch,
                  "permit applying a gain across plant kinds");
    sim->add_flag("--open-loop", open_loop, "run with zero control input");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    std::string stage;
    for (auto& s : stages)
        if (s.cmd->parsed()) stage = s.name;

    std::string config_text;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        std::stringstream buf;
        buf << f.rdbuf();
        if (!f.good() && !f.eof()) return fail("cannot read " + config_path, EFC_ERR_IO);
        config_text = buf.str();
    }

    efc_session* session = nullptr;
    efc_status rc = efc_session_new(config_text.empty() ? nullptr : config_text.c_str(), &session);
    if (rc != EFC_OK) {
        std::string msg = session ? efc_last_error(session) : "failed to create session";
        efc_session_free(session);
        return fail(msg, rc);
    }

    std::vector<Override> overrides;
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            efc_session_free(session);
            return fail("--set expects section.key=value, got: " + s, EFC_ERR_USAGE);
        }
        overrides.push_back({s.substr(0, eq), as_json_value(s.substr(eq + 1))});
    }
    if (has_seed_datagen) overrides.push_back({"seeds.datagen", std::to_string(seed_datagen)});
    if (has_seed_model) overrides.push_back({"seeds.model", std::to_string(seed_model)});
    if (has_seed_control) overrides.push_back({"seeds.control", std::to_string(seed_control)});
    if (!plant.empty()) overrides.push_back({"stage_options.plant", quote(plant)});
    if (!method.empty()) overrides.push_back({"stage_options.method", quote(method)});
    if (!poles.empty()) overrides.push_back({"control.poles", joined_list(poles)});
    if (sim_steps > 0) overrides.push_back({"stage_options.steps", std::to_string(sim_steps)});
    if (!reference.empty()) overrides.push_back({"stage_options.reference", quote(reference)});
    if (!gain_from.empty()) overrides.push_back({"stage_options.gain_from", quote(gain_from)});
    if (allow_mismatch) overrides.push_back({"stage_options.allow_mismatch", "true"});
    if (open_loop) overrides.push_back({"stage_options.open_loop", "true"});

    for (const auto& o : overrides) {
        rc = efc_session_set(session, o.key.c_str(), o.value.c_str());
        if (rc != EFC_OK) {
            std::string msg = efc_last_error(session);
            efc_session_free(session);
            return fail(msg, rc);
        }
    }

    rc = efc_run_stage(session, stage.c_str(), run_dir.c_str());
    if (rc != EFC_OK) {
        std::string msg = "stage " + stage + ": " + efc_last_error(session);
        efc_session_free(session);
        return fail(msg, rc);
    }

    std::string warnings = efc_last_warnings(session);
    if (!warnings.empty()) {
        std::istringstream ws(warnings);
        std::string line;
        while (std::getline(ws, line)) std::cerr << "warning: " << line << std::endl;
    }
    std::cout << efc_last_summary(session) << std::endl;
    efc_session_free(session);
    return 0;
}
