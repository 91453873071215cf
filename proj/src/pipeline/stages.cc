#include "pipeline/stages.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "control/control.h"
#include "core/errors.h"
#include "core/jsonio.h"
#include "krylov/krylov.h"
#include "pipeline/sim.h"
#include "randonet/randonet.h"
#include "reduction/reduction.h"

namespace efc {

std::string artifact_path(const std::string& run_dir, const std::string& name) {
    return (std::filesystem::path(run_dir) / name).string();
}

namespace {

namespace fs = std::filesystem;

bool exists(const std::string& path) { return fs::exists(path); }

std::vector<std::string> selected_plants(const PipelineConfig& cfg) {
    if (cfg.stage_options.plant == "both") return {"fd", "surrogate"};
    return {cfg.stage_options.plant};
}

std::vector<std::string> selected_methods(const PipelineConfig& cfg) {
    if (cfg.stage_options.method == "both") return {"dlqr", "pp"};
    return {cfg.stage_options.method};
}

// key=value fragments, joined with single spaces.
class Summary {
  public:
    explicit Summary(const std::string& stage) { add("stage", stage); }
    void add(const std::string& key, const std::string& value) {
        if (!line_.empty()) line_ += ' ';
        line_ += key + "=" + value;
    }
    void add(const std::string& key, double value) { add(key, format_double(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    const std::string& str() const { return line_; }

  private:
    std::string line_;
};

StepMap fd_step_map(const BratuParams& plant) {
    return [plant](const Vec& u) { return bratu_step(u, plant); };
}

ForcedStep fd_forced_map(const BratuParams& plant, const Mat& b) {
    return [plant, b](const Vec& u, const Vec& z) { return bratu_step_forced(u, b * z, plant); };
}

StepMap surrogate_step_map(const RandONet& net) {
    return [&net](const Vec& u) { return net.predict(u); };
}

ForcedStep surrogate_forced_map(const RandONet& net, const Mat& b) {
    return [&net, b](const Vec& u, const Vec& z) {
        Vec out = net.predict(u) + b * z;
        out[0] = 0.0;
        out[out.size() - 1] = 0.0;
        return out;
    };
}

NewtonOptions newton_options(const PipelineConfig& cfg, bool surrogate) {
    NewtonOptions opt;
    opt.tol_res = surrogate ? cfg.krylov.newton_tol_surrogate : cfg.krylov.newton_tol_fd;
    opt.tol_step = cfg.krylov.newton_tol_step;
    opt.max_iter = cfg.krylov.newton_max_iter;
    opt.central_diff = cfg.krylov.central_diff;
    opt.gmres.tol = cfg.krylov.gmres_tol;
    opt.gmres.restart = cfg.krylov.gmres_restart;
    opt.gmres.max_iter = cfg.krylov.gmres_max_iter;
    return opt;
}

RandONet load_model(const std::string& run_dir) {
    const std::string path = artifact_path(run_dir, "model.json");
    if (!exists(path)) fail_io("missing model artifact (run the train stage first): " + path);
    return RandONet::load(path);
}


void save_spectrum(const std::string& path, const std::string& plant, const SpectrumResult& spec) {
    int n_unstable = 0;
    for (int i = 0; i < spec.values.size(); ++i)
        if (std::abs(spec.values[i]) > 1.0) ++n_unstable;
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", 1);
    w.kv("plant", plant);
    w.kv("m_k", spec.steps);
    w.kv("truncated", spec.truncated);
    w.kv("n_unstable", n_unstable);
    Vec re(spec.values.size()), im(spec.values.size());
    for (int i = 0; i < spec.values.size(); ++i) {
        re[i] = spec.values[i].real();
        im[i] = spec.values[i].imag();
    }
    w.kv("ritz_re", re);
    w.kv("ritz_im", im);
    w.key("residual_estimates");
    w.begin_array();
    for (double r : spec.residual_estimates) w.value(r);
    w.end_array();
    w.end_object();
    save_atomic(path, w.str());
}

std::string stage_gen_data(const PipelineConfig& cfg, const std::string& run_dir) {
    Dataset ds = generate_dataset(cfg.plant, cfg.datagen, cfg.seeds.datagen);
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", 1);
    w.kv("seed", static_cast<std::int64_t>(cfg.seeds.datagen));
    w.kv("m", cfg.plant.m);
    w.kv("dt_report", cfg.plant.dt_report);
    w.kv("n_traj", cfg.datagen.n_traj);
    w.kv("steps", cfg.datagen.steps);
    w.kv("discarded", ds.discarded);
    w.kv("max_abs_state", ds.max_abs_state);
    w.kv("X", ds.X);
    w.kv("Y", ds.Y);
    w.end_object();
    save_atomic(artifact_path(run_dir, "dataset.json"), w.str());

    Summary s("gen-data");
    s.add("pairs", static_cast<int>(ds.X.cols()));
    s.add("discarded", ds.discarded);
    s.add("max_abs_state", ds.max_abs_state);
    return s.str();
}

std::string stage_train(const PipelineConfig& cfg, const std::string& run_dir) {
    Dataset ds = load_dataset(artifact_path(run_dir, "dataset.json"));
    if (ds.X.rows() != cfg.plant.m)
        fail_usage("dataset grid does not match the configured plant");
    RandONet net = RandONet::train(ds, cfg.plant.grid(), cfg.plant.dt_report, cfg.model,
                                   cfg.seeds.model);
    net.save(artifact_path(run_dir, "model.json"));

    Summary s("train");
    s.add("n_train", net.meta().n_train);
    s.add("n_val", net.meta().n_val);
    s.add("mu_trunk", net.meta().mu_trunk);
    s.add("mu_branch", net.meta().mu_branch);
    s.add("train_rel_fro", net.meta().train_rel_fro);
    s.add("val_median_l2", net.meta().val_median_l2);
    s.add("val_max_l2", net.meta().val_max_l2);
    return s.str();
}

// Initial Newton iterate aiming at the unstable upper branch: a scaled copy
// of its closed-form profile. Starting from rest would slide into the stable
// lower branch instead. Past the fold there is no closed form (and no steady
// state), so the solve starts from rest and fails honestly.
Vec steady_state_guess(const BratuParams& plant) {
    try {
        return Vec(1.05 * analytic_steady_state(plant, SteadyBranch::upper));
    } catch (const Error&) {
        return Vec::Zero(plant.m);
    }
}

std::string stage_steady_state(const PipelineConfig& cfg, const std::string& run_dir) {
    Summary s("steady-state");
    const Vec guess = steady_state_guess(cfg.plant);
    for (const std::string& plant : selected_plants(cfg)) {
        const bool surrogate = plant == "surrogate";
        std::optional<RandONet> net;
        StepMap step;
        if (surrogate) {
            net.emplace(load_model(run_dir));
            step = surrogate_step_map(*net);
        } else {
            step = fd_step_map(cfg.plant);
        }

        NewtonResult res = newton_fixed_point(step, guess, newton_options(cfg, surrogate));
        if (!res.converged)
            fail_numeric("steady-state stage (" + plant + "): Newton stalled at residual " +
                         format_double(res.residual));

        SteadyStateArtifact art;
        art.plant = plant;
        art.u = res.u;
        art.residual = res.residual;
        art.iterations = res.iterations;
        art.history = res.history;
        if (!surrogate) {
            try {
                Vec ua = analytic_steady_state(cfg.plant, SteadyBranch::upper);
                art.analytic_available = true;
                art.analytic_gap_linf = (res.u - ua).cwiseAbs().maxCoeff();
                art.theta = steady_theta(cfg.plant.lambda, SteadyBranch::upper);
            } catch (const Error&) {
                // no closed form at or beyond the fold; artifact records absence
            }
        }
        save_steady_state(artifact_path(run_dir, "steady_state_" + plant + ".json"), art);
        s.add(plant + "_residual", res.residual);
        s.add(plant + "_iterations", res.iterations);
        if (art.analytic_available) s.add(plant + "_analytic_gap_linf", art.analytic_gap_linf);
    }
    return s.str();
}

std::string stage_spectrum(const PipelineConfig& cfg, const std::string& run_dir) {
    Summary s("spectrum");
    for (const std::string& plant : selected_plants(cfg)) {
        const bool surrogate = plant == "surrogate";
        const std::string ss_path = artifact_path(run_dir, "steady_state_" + plant + ".json");
        if (!exists(ss_path))
            fail_io("missing steady state artifact (run the steady-state stage first): " + ss_path);
        SteadyStateArtifact ss = load_steady_state(ss_path);

        std::optional<RandONet> net;
        StepMap step;
        if (surrogate) {
            net.emplace(load_model(run_dir));
            step = surrogate_step_map(*net);
        } else {
            step = fd_step_map(cfg.plant);
        }
        Vec s0 = step(ss.u);
        LinOp jac = [&](const Vec& v) {
            return jvp(step, ss.u, v, &s0, cfg.krylov.central_diff);
        };
        ArnoldiOptions aopt;
        aopt.m_k = std::min(cfg.krylov.m_k, cfg.plant.m);
        SpectrumResult spec = arnoldi_spectrum(jac, cfg.plant.m, aopt);
        save_spectrum(artifact_path(run_dir, "spectrum_" + plant + ".json"), plant, spec);

        int n_unstable = 0;
        for (int i = 0; i < spec.values.size(); ++i)
            if (std::abs(spec.values[i]) > 1.0) ++n_unstable;
        s.add(plant + "_n_unstable", n_unstable);
        s.add(plant + "_leading_re", spec.values[0].real());
        s.add(plant + "_leading_im", spec.values[0].imag());
    }
    return s.str();
}

std::string stage_reduce(const PipelineConfig& cfg, const std::string& run_dir,
                         std::vector<std::string>* warnings) {
    Summary s("reduce");
    const Mat b = actuator_matrix(cfg.plant.grid(), cfg.actuators);
    for (const std::string& plant : selected_plants(cfg)) {
        const bool surrogate = plant == "surrogate";
        const std::string ss_path = artifact_path(run_dir, "steady_state_" + plant + ".json");
        if (!exists(ss_path))
            fail_io("missing steady state artifact (run the steady-state stage first): " + ss_path);
        SteadyStateArtifact ss = load_steady_state(ss_path);

        std::optional<RandONet> net;
        StepMap step;
        ForcedStep forced;
        if (surrogate) {
            net.emplace(load_model(run_dir));
            step = surrogate_step_map(*net);
            forced = surrogate_forced_map(*net, b);
        } else {
            step = fd_step_map(cfg.plant);
            forced = fd_forced_map(cfg.plant, b);
        }

        ReductionOptions opt;
        opt.m_slow = cfg.reduction.m_slow;
        opt.m_k = cfg.krylov.m_k;
        opt.h_eps = cfg.reduction.h_eps;
        opt.d_mode = cfg.reduction.d_mode;
        opt.central_diff = cfg.krylov.central_diff;
        ReducedModel model = build_reduced_model(step, forced, cfg.actuators.count(), ss.u, opt,
                                                 plant);
        save_reduced_model(model, artifact_path(run_dir, "reduced_" + plant + ".json"));
        if (warnings)
            for (const auto& wmsg : model.warnings) warnings->push_back(plant + ": " + wmsg);

        s.add(plant + "_m_slow", model.m_slow());
        s.add(plant + "_expanded", model.expanded);
        s.add(plant + "_subspace_residual", model.subspace_residual);
    }
    return s.str();
}

std::vector<std::complex<double>> configured_poles(const PipelineConfig& cfg, int m_slow) {
    std::vector<std::complex<double>> poles;
    for (double p : cfg.control.poles) poles.emplace_back(p, 0.0);
    int pad = 0;
    while (static_cast<int>(poles.size()) < m_slow)
        poles.emplace_back(cfg.control.pole_pad_start + cfg.control.pole_pad_step * pad++, 0.0);
    poles.resize(m_slow);
    return poles;
}

std::string stage_design(const PipelineConfig& cfg, const std::string& run_dir,
                         std::vector<std::string>* warnings) {
    Summary s("design");
    for (const std::string& plant : selected_plants(cfg)) {
        const std::string red_path = artifact_path(run_dir, "reduced_" + plant + ".json");
        if (!exists(red_path))
            fail_io("missing reduced model artifact (run the reduce stage first): " + red_path);
        ReducedModel reduced = load_reduced_model(red_path);
        const int m = reduced.m_slow();
        const int k = reduced.inputs();

        for (const std::string& method : selected_methods(cfg)) {
            ControllerGain gain;
            if (method == "dlqr") {
                LqrSpec spec;
                spec.Q = cfg.control.q_scale * Mat::Identity(m, m);
                spec.R = cfg.control.r_scale * cfg.plant.dt_report * cfg.plant.dt_report *
                         Mat::Identity(k, k);
                DareOptions dopt;
                dopt.tol = cfg.control.dare_tol;
                dopt.max_iter = cfg.control.dare_max_iter;
                gain = dlqr_gain(reduced.F, reduced.D, spec, dopt);
                s.add(plant + "_dlqr_iterations", gain.dare.iterations);
                s.add(plant + "_dlqr_residual", gain.dare.residual);
            } else {
                gain = pole_place(reduced.F, reduced.D, configured_poles(cfg, m),
                                  cfg.seeds.control);
                Eigen::VectorXcd targets(m);
                for (int i = 0; i < m; ++i) targets[i] = gain.target_poles[i];
                s.add(plant + "_pp_error", multiset_eig_distance(targets, gain.closed_loop_eigs));
            }
            gain.provenance = plant;
            save_gain(gain, artifact_path(run_dir, "gain_" + method + "_" + plant + ".json"));
            if (warnings)
                for (const auto& wmsg : gain.warnings) warnings->push_back(plant + ": " + wmsg);
            s.add(plant + "_" + method + "_rho", std::abs(gain.closed_loop_eigs[0]));
        }
    }
    return s.str();
}

// The feedback law always regulates toward the steady state the reduced model
// was built around (reduced.u_ss): that is the only point where the
// linearization, and therefore the gain, is valid. The error column of the
// trace is a measurement, not part of the loop, and it defaults to the true
// (finite-difference) steady state when the run directory has one: a
// surrogate loop is judged by how close it parks the state to the real
// target, which is the model-fidelity floor. An explicit reference overrides
// the measurement profile for experiments.
Vec load_reference(const PipelineConfig& cfg, const std::string& run_dir,
                   const ReducedModel& reduced, std::string* source) {
    if (!cfg.stage_options.reference.empty()) {
        *source = cfg.stage_options.reference;
        return load_steady_state(cfg.stage_options.reference).u;
    }
    const std::string canonical = artifact_path(run_dir, "steady_state_fd.json");
    if (exists(canonical)) {
        *source = canonical;
        return load_steady_state(canonical).u;
    }
    *source = "reduced.u_ss";
    return reduced.u_ss;
}

std::string stage_simulate(const PipelineConfig& cfg, const std::string& run_dir) {
    Summary s("simulate");
    const Mat b = actuator_matrix(cfg.plant.grid(), cfg.actuators);
    for (const std::string& plant : selected_plants(cfg)) {
        const bool surrogate = plant == "surrogate";
        std::optional<RandONet> net;
        ForcedStep forced;
        if (surrogate) {
            net.emplace(load_model(run_dir));
            forced = surrogate_forced_map(*net, b);
        } else {
            forced = fd_forced_map(cfg.plant, b);
        }

        const std::string gain_kind =
            cfg.stage_options.gain_from.empty() ? plant : cfg.stage_options.gain_from;
        if (gain_kind != plant && !cfg.stage_options.allow_mismatch)
            fail_usage("gain provenance (" + gain_kind + ") does not match the plant (" + plant +
                       "); pass allow_mismatch to run anyway");

        ClosedLoopOptions opt;
        opt.steps = cfg.stage_options.steps > 0 ? cfg.stage_options.steps : cfg.sim.steps;
        opt.blow_up = cfg.sim.blow_up;
        opt.snapshot_every = cfg.sim.snapshot_every;
        opt.dt_report = cfg.plant.dt_report;

        if (cfg.stage_options.open_loop) {
            const std::string red_path = artifact_path(run_dir, "reduced_" + gain_kind + ".json");
            if (!exists(red_path))
                fail_io("missing reduced model artifact (run the reduce stage first): " + red_path);
            ReducedModel reduced = load_reduced_model(red_path);
            std::string ref_source;
            Vec ref = load_reference(cfg, run_dir, reduced, &ref_source);
            Vec u0 = cfg.sim.ic == "perturbation" ? initial_perturbation(ref, cfg.plant.grid())
                                                  : ref;
            ClosedLoopTrace trace =
                run_open_loop(forced, b, cfg.actuators.count(), ref, u0, opt);
            trace.plant_kind = plant;
            write_trace_csv(trace, artifact_path(run_dir, "trace_" + plant + "_open.csv"));
            write_snapshots_csv(trace, artifact_path(run_dir, "snapshots_" + plant + "_open.csv"));
            s.add(plant + "_open_final", trace.final_error());
            s.add(plant + "_open_diverged", trace.diverged);
            continue;
        }

        for (const std::string& method : selected_methods(cfg)) {
            const std::string red_path = artifact_path(run_dir, "reduced_" + gain_kind + ".json");
            const std::string gain_path =
                artifact_path(run_dir, "gain_" + method + "_" + gain_kind + ".json");
            if (!exists(red_path))
                fail_io("missing reduced model artifact (run the reduce stage first): " + red_path);
            if (!exists(gain_path))
                fail_io("missing gain artifact (run the design stage first): " + gain_path);
            ReducedModel reduced = load_reduced_model(red_path);
            ControllerGain gain = load_gain(gain_path);
            if (gain.provenance != reduced.provenance)
                fail_io("gain and reduced model provenance disagree in " + run_dir);

            std::string ref_source;
            Vec ref = load_reference(cfg, run_dir, reduced, &ref_source);
            // The perturbed start is built from the measurement reference so
            // every plant gets the same initial field; the plain start holds
            // the loop at its own equilibrium.
            Vec u0 = cfg.sim.ic == "perturbation" ? initial_perturbation(ref, cfg.plant.grid())
                                                  : reduced.u_ss;
            ClosedLoopTrace trace =
                run_closed_loop(forced, b, reduced.V, gain.K, reduced.u_ss, ref, u0, opt);
            trace.plant_kind = plant;
            trace.controller = method;
            write_trace_csv(trace, artifact_path(run_dir, "trace_" + plant + "_" + method + ".csv"));
            write_snapshots_csv(trace,
                                artifact_path(run_dir, "snapshots_" + plant + "_" + method + ".csv"));
            s.add(plant + "_" + method + "_final", trace.final_error());
            s.add(plant + "_" + method + "_min", trace.min_error());
            s.add(plant + "_" + method + "_diverged", trace.diverged);
        }
    }
    return s.str();
}

struct TraceFileSummary {
    bool present = false;
    double final_error = 0.0;
    double min_error = 0.0;
    int rows = 0;
    bool diverged_hint = false;  // fewer rows than requested steps
};

TraceFileSummary summarize_trace_csv(const std::string& path, int expected_rows) {
    TraceFileSummary out;
    if (!exists(path)) return out;
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);  // header
    double last = 0.0, best = std::numeric_limits<double>::infinity();
    while (std::getline(f, line)) {
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        last = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        best = std::min(best, last);
        ++out.rows;
    }
    out.present = true;
    out.final_error = last;
    out.min_error = best;
    out.diverged_hint = out.rows < expected_rows;
    return out;
}

std::string stage_report(const PipelineConfig& cfg, const std::string& run_dir) {
    JsonWriter w;
    std::ostringstream txt;
    w.begin_object();
    w.kv("schema_version", 1);
    txt << "equation-free control pipeline report\n";
    txt << "run_dir: " << run_dir << "\n\n";

    bool any = false;
    std::optional<SteadyStateArtifact> ss_fd, ss_no;
    w.key("steady_state");
    w.begin_object();
    txt << "fixed points\n";
    for (const std::string plant : {"fd", "surrogate"}) {
        const std::string path = artifact_path(run_dir, "steady_state_" + std::string(plant) + ".json");
        if (!exists(path)) continue;
        any = true;
        SteadyStateArtifact ss = load_steady_state(path);
        (plant == std::string("fd") ? ss_fd : ss_no) = ss;
        w.key(plant);
        w.begin_object();
        w.kv("residual", ss.residual);
        w.kv("iterations", ss.iterations);
        if (ss.analytic_available) w.kv("analytic_gap_linf", ss.analytic_gap_linf);
        w.end_object();
        txt << "  " << plant << ": residual=" << format_double(ss.residual)
            << " iterations=" << ss.iterations;
        if (ss.analytic_available)
            txt << " analytic_gap_linf=" << format_double(ss.analytic_gap_linf);
        txt << "\n";
    }
    if (ss_fd && ss_no) {
        double gap = (ss_fd->u - ss_no->u).cwiseAbs().maxCoeff();
        w.kv("fd_vs_surrogate_gap_linf", gap);
        txt << "  fd_vs_surrogate_gap_linf=" << format_double(gap) << "\n";
    }
    w.end_object();

    w.key("spectrum");
    w.begin_object();
    txt << "\nopen-loop spectra (leading Ritz values)\n";
    std::optional<SpectrumArtifact> sp_fd, sp_no;
    for (const std::string plant : {"fd", "surrogate"}) {
        const std::string path = artifact_path(run_dir, "spectrum_" + std::string(plant) + ".json");
        if (!exists(path)) continue;
        any = true;
        SpectrumArtifact sp = load_spectrum(path);
        (plant == std::string("fd") ? sp_fd : sp_no) = sp;
        w.key(plant);
        w.begin_object();
        w.kv("n_unstable", sp.n_unstable);
        const int show = std::min<int>(5, static_cast<int>(sp.ritz.size()));
        Vec re(show), im(show);
        for (int i = 0; i < show; ++i) {
            re[i] = sp.ritz[i].real();
            im[i] = sp.ritz[i].imag();
        }
        w.kv("leading_re", re);
        w.kv("leading_im", im);
        w.end_object();
        txt << "  " << plant << ": n_unstable=" << sp.n_unstable << " leading=[";
        for (int i = 0; i < show; ++i) {
            if (i) txt << ", ";
            txt << format_double(sp.ritz[i].real());
            if (std::abs(sp.ritz[i].imag()) > 0)
                txt << (sp.ritz[i].imag() > 0 ? "+" : "-")
                    << format_double(std::abs(sp.ritz[i].imag())) << "i";
        }
        txt << "]\n";
    }
    if (sp_fd && sp_no && sp_fd->ritz.size() > 0 && sp_no->ritz.size() > 0) {
        double gap = std::abs(sp_fd->ritz[0] - sp_no->ritz[0]);
        w.kv("leading_ritz_gap", gap);
        txt << "  leading_ritz_gap=" << format_double(gap) << "\n";
    }
    w.end_object();

    w.key("gains");
    w.begin_object();
    txt << "\nclosed-loop eigenvalues\n";
    for (const std::string plant : {"fd", "surrogate"}) {
        for (const std::string method : {"dlqr", "pp"}) {
            const std::string path = artifact_path(
                run_dir, "gain_" + std::string(method) + "_" + std::string(plant) + ".json");
            if (!exists(path)) continue;
            any = true;
            ControllerGain gain = load_gain(path);
            w.key(std::string(plant) + "_" + std::string(method));
            w.begin_object();
            Vec re(gain.closed_loop_eigs.size()), im(gain.closed_loop_eigs.size());
            for (int i = 0; i < gain.closed_loop_eigs.size(); ++i) {
                re[i] = gain.closed_loop_eigs[i].real();
                im[i] = gain.closed_loop_eigs[i].imag();
            }
            w.kv("closed_loop_re", re);
            w.kv("closed_loop_im", im);
            w.kv("spectral_radius", std::abs(gain.closed_loop_eigs[0]));
            w.end_object();
            txt << "  " << plant << " " << method << ": rho="
                << format_double(std::abs(gain.closed_loop_eigs[0])) << " eigs=[";
            for (int i = 0; i < re.size(); ++i) {
                if (i) txt << ", ";
                txt << format_double(re[i]);
                if (std::abs(im[i]) > 0)
                    txt << (im[i] > 0 ? "+" : "-") << format_double(std::abs(im[i])) << "i";
            }
            txt << "]\n";
        }
    }
    w.end_object();

    w.key("traces");
    w.begin_object();
    txt << "\nclosed-loop traces (final / min l2 error)\n";
    for (const std::string plant : {"fd", "surrogate"}) {
        for (const std::string method : {"dlqr", "pp", "open"}) {
            const std::string name = "trace_" + std::string(plant) + "_" + std::string(method) + ".csv";
            TraceFileSummary ts =
                summarize_trace_csv(artifact_path(run_dir, name), cfg.sim.steps + 1);
            if (!ts.present) continue;
            any = true;
            w.key(std::string(plant) + "_" + std::string(method));
            w.begin_object();
            w.kv("final_l2_error", ts.final_error);
            w.kv("min_l2_error", ts.min_error);
            w.kv("rows", ts.rows);
            w.kv("truncated", ts.diverged_hint);
            w.end_object();
            txt << "  " << plant << " " << method << ": final=" << format_double(ts.final_error)
                << " min=" << format_double(ts.min_error) << " rows=" << ts.rows
                << (ts.diverged_hint ? " (truncated)" : "") << "\n";
        }
    }
    w.end_object();
    w.end_object();

    if (!any) fail_io("no artifacts found in " + run_dir + "; nothing to report");
    save_atomic(artifact_path(run_dir, "report.json"), w.str());
    save_atomic(artifact_path(run_dir, "report.txt"), txt.str());

    Summary s("report");
    s.add("json", artifact_path(run_dir, "report.json"));
    s.add("txt", artifact_path(run_dir, "report.txt"));
    return s.str();
}

}  // namespace

SteadyStateArtifact load_steady_state(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "steady state file " + path;
    if (require(j, "schema_version", ctx).get<int>() != 1)
        fail_io("unsupported steady state schema_version in " + path);
    SteadyStateArtifact out;
    out.plant = require(j, "plant", ctx).get<std::string>();
    out.u = to_vec(require(j, "u", ctx));
    out.residual = require(j, "residual", ctx).get<double>();
    out.iterations = require(j, "iterations", ctx).get<int>();
    for (const auto& r : require(j, "history", ctx)) out.history.push_back(r.get<double>());
    out.analytic_available = require(j, "analytic_available", ctx).get<bool>();
    if (out.analytic_available) {
        out.analytic_gap_linf = require(j, "analytic_gap_linf", ctx).get<double>();
        out.theta = require(j, "theta", ctx).get<double>();
    }
    return out;
}

void save_steady_state(const std::string& path, const SteadyStateArtifact& artifact) {
    JsonWriter w;
    w.begin_object();
    w.kv("schema_version", 1);
    w.kv("plant", artifact.plant);
    w.kv("u", artifact.u);
    w.kv("residual", artifact.residual);
    w.kv("iterations", artifact.iterations);
    w.key("history");
    w.begin_array();
    for (double r : artifact.history) w.value(r);
    w.end_array();
    w.kv("analytic_available", artifact.analytic_available);
    if (artifact.analytic_available) {
        w.kv("analytic_gap_linf", artifact.analytic_gap_linf);
        w.kv("theta", artifact.theta);
    }
    w.end_object();
    save_atomic(path, w.str());
}

SpectrumArtifact load_spectrum(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "spectrum file " + path;
    if (require(j, "schema_version", ctx).get<int>() != 1)
        fail_io("unsupported spectrum schema_version in " + path);
    SpectrumArtifact out;
    out.plant = require(j, "plant", ctx).get<std::string>();
    out.m_k = require(j, "m_k", ctx).get<int>();
    out.truncated = require(j, "truncated", ctx).get<bool>();
    out.n_unstable = require(j, "n_unstable", ctx).get<int>();
    Vec re = to_vec(require(j, "ritz_re", ctx));
    Vec im = to_vec(require(j, "ritz_im", ctx));
    out.ritz.resize(re.size());
    for (int i = 0; i < re.size(); ++i) out.ritz[i] = {re[i], im[i]};
    for (const auto& r : require(j, "residual_estimates", ctx))
        out.residual_estimates.push_back(r.get<double>());
    return out;
}

Dataset load_dataset(const std::string& path) {
    nlohmann::json j = load_json(path);
    const std::string ctx = "dataset file " + path;
    if (require(j, "schema_version", ctx).get<int>() != 1)
        fail_io("unsupported dataset schema_version in " + path);
    Dataset ds;
    ds.X = to_mat(require(j, "X", ctx));
    ds.Y = to_mat(require(j, "Y", ctx));
    ds.discarded = require(j, "discarded", ctx).get<int>();
    ds.max_abs_state = require(j, "max_abs_state", ctx).get<double>();
    if (ds.X.rows() != ds.Y.rows() || ds.X.cols() != ds.Y.cols())
        fail_io("dataset X and Y shapes disagree in " + path);
    return ds;
}

std::string run_stage(const PipelineConfig& cfg, const std::string& stage,
                      const std::string& run_dir, std::vector<std::string>* warnings) {
    cfg.validate();
    if (run_dir.empty()) fail_usage("run directory must not be empty");
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail_io("cannot create run directory " + run_dir + ": " + ec.message());
    save_atomic(artifact_path(run_dir, "resolved.cfg"), config_to_json(cfg));

    if (stage == "gen-data") return stage_gen_data(cfg, run_dir);
    if (stage == "train") return stage_train(cfg, run_dir);
    if (stage == "steady-state") return stage_steady_state(cfg, run_dir);
    if (stage == "spectrum") return stage_spectrum(cfg, run_dir);
    if (stage == "reduce") return stage_reduce(cfg, run_dir, warnings);
    if (stage == "design") return stage_design(cfg, run_dir, warnings);
    if (stage == "simulate") return stage_simulate(cfg, run_dir);
    if (stage == "report") return stage_report(cfg, run_dir);
    if (stage == "pipeline") {
        PipelineConfig full = cfg;
        full.stage_options.plant = "both";
        full.stage_options.method = "both";
        full.stage_options.open_loop = false;
        stage_gen_data(full, run_dir);
        stage_train(full, run_dir);
        stage_steady_state(full, run_dir);
        stage_spectrum(full, run_dir);
        stage_reduce(full, run_dir, warnings);
        stage_design(full, run_dir, warnings);
        std::string sim_summary = stage_simulate(full, run_dir);
        stage_report(full, run_dir);
        Summary s("pipeline");
        s.add("run_dir", run_dir);
        // carry the simulate keys through; they are the headline numbers
        return s.str() + sim_summary.substr(sim_summary.find(' '));
    }
    fail_usage("unknown stage: " + stage);
}

}  // namespace efc
