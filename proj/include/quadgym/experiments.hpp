#pragma once

// Episode runners shared by the command-line tool and the acceptance suite.

#include "quadgym/config.hpp"
#include "quadgym/pilot.hpp"
#include "quadgym/policy.hpp"
#include "quadgym/trace.hpp"
#include "quadgym/vec_env.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace quadgym {

struct RunSummary {
    TaskKind task = TaskKind::Hovering;
    ControlMode mode = ControlMode::PY;
    std::size_t episodes = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double mean_position_error = 0.0;  ///< mean over steps of distance to the task target / reference
    double med = 0.0;                  ///< tracking only: mean distance to the time-aligned reference
    std::vector<double> final_errors;  ///< per episode, at its last step
    std::vector<EpisodeOutcome> outcomes;

    nlohmann::json to_json() const {
        std::vector<std::string> outs;
        for (auto o : outcomes) outs.emplace_back(to_string(o));
        return {{"task", std::string(quadgym::to_string(task))},
                {"mode", std::string(quadgym::to_string(mode))},
                {"episodes", episodes},
                {"successes", successes},
                {"success_rate", success_rate},
                {"mean_position_error", mean_position_error},
                {"med", med},
                {"final_errors", final_errors},
                {"outcomes", outs}};
    }
};

inline bool episode_succeeded(TaskKind task, EpisodeOutcome o) {
    switch (task) {
        case TaskKind::TargetHitting: return o == EpisodeOutcome::Hit;
        case TaskKind::Planning: return o == EpisodeOutcome::GoalReached;
        default: return o == EpisodeOutcome::TimedOut;
    }
}

struct RunOptions {
    std::size_t episodes = 1;
    const PolicyWeights* policy = nullptr;  ///< scripted pilot when null
    double pilot_lead = 0.0;
    bool record = true;
};

struct RunOutput {
    RunSummary summary;
    std::vector<TraceRecord> records;
    /// Per env, per step distance to the task guidance point (first episode only).
    std::vector<std::vector<double>> errors;
};

/// Runs `episodes` environments side by side until each has finished its
/// first episode. Only first episodes are recorded.
inline RunOutput run_episodes(EnvConfig cfg, const RunOptions& opt) {
    cfg.n_envs = std::max<std::size_t>(opt.episodes, 1);
    VecEnv env(cfg);
    if (opt.policy) {
        if (opt.policy->obs_dim != env.obs_dim() || opt.policy->act_dim != env.act_dim())
            throw std::invalid_argument("policy dimensions do not match the environment");
    }
    PilotBank pilots(cfg, opt.pilot_lead);
    std::vector<double> obs = env.reset();
    const std::size_t n = env.num_envs();
    std::vector<bool> finished(n, false);
    std::vector<EpisodeOutcome> outcomes(n, EpisodeOutcome::Running);
    std::vector<double> final_err(n, 0.0);

    RunOutput out;
    out.errors.resize(n);
    double err_sum = 0.0;
    std::size_t err_count = 0;

    while (std::find(finished.begin(), finished.end(), false) != finished.end()) {
        std::vector<double> actions;
        if (opt.policy) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto a = mlp_forward(*opt.policy, std::span<const double>(obs).subspan(i * env.obs_dim(), env.obs_dim()));
                actions.insert(actions.end(), a.begin(), a.end());
            }
        } else {
            actions = pilots.actions(env);
        }
        const StepResult r = env.step(actions);
        pilots.on_step(r);
        for (std::size_t i = 0; i < n; ++i) {
            if (finished[i]) continue;
            const StepInfo& info = r.info[i];
            const double e = (info.state.position - info.guidance.position).norm();
            out.errors[i].push_back(e);
            err_sum += e;
            ++err_count;
            final_err[i] = e;
            if (opt.record) {
                TraceRecord rec;
                rec.env = i;
                rec.t = info.time;
                rec.state = info.state;
                rec.action.assign(actions.begin() + static_cast<std::ptrdiff_t>(i * env.act_dim()),
                                  actions.begin() + static_cast<std::ptrdiff_t>((i + 1) * env.act_dim()));
                for (const auto& term : info.reward.terms) {
                    rec.term_names.push_back(term.name);
                    rec.terms.push_back(term.value);
                }
                rec.reward = info.reward.total;
                rec.done = r.done[i] != 0;
                rec.outcome = info.outcome;
                out.records.push_back(std::move(rec));
            }
            if (r.done[i]) {
                finished[i] = true;
                outcomes[i] = info.outcome;
            }
        }
        obs = r.obs;
    }

    auto& s = out.summary;
    s.task = cfg.task;
    s.mode = cfg.mode;
    s.episodes = n;
    for (auto o : outcomes)
        if (episode_succeeded(cfg.task, o)) ++s.successes;
    s.success_rate = static_cast<double>(s.successes) / static_cast<double>(n);
    s.mean_position_error = err_count ? err_sum / static_cast<double>(err_count) : 0.0;
    s.med = cfg.task == TaskKind::Tracking ? s.mean_position_error : 0.0;
    s.final_errors = final_err;
    s.outcomes = outcomes;
    return out;
}

// --- acceptance experiments ----------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct HoverTestResult {
    CheckResult check;
    std::vector<double> settled_error;  ///< per episode, max error over the settle window
    RunOutput run;
};

/// 8 episodes from random starts in the 2 m cube, PY mode, scripted pilot.
/// Passes when every episode stays within `tolerance` of the target over the
/// last `window` seconds of a `horizon`-second flight.
inline HoverTestResult hover_test(EnvConfig cfg, std::size_t episodes = 8, double horizon = 5.0,
                                  double window = 0.5, double tolerance = 0.1) {
    cfg.task = TaskKind::Hovering;
    cfg.mode = ControlMode::PY;
    cfg.task_params.hover_target = {0.0, 0.0, 1.0};
    cfg.dr.init_cube_side = 2.0;
    cfg.max_episode_steps = static_cast<std::size_t>(std::lround(horizon / cfg.dt));
    HoverTestResult res;
    res.run = run_episodes(cfg, {episodes, nullptr, 0.0, false});
    const std::size_t tail = static_cast<std::size_t>(std::lround(window / cfg.dt));
    bool ok = true;
    std::ostringstream msg;
    msg.precision(4);
    for (std::size_t i = 0; i < res.run.errors.size(); ++i) {
        const auto& e = res.run.errors[i];
        const bool full = res.run.summary.outcomes[i] == EpisodeOutcome::TimedOut;
        const std::size_t from = e.size() > tail ? e.size() - tail : 0;
        const double worst = *std::max_element(e.begin() + static_cast<std::ptrdiff_t>(from), e.end());
        res.settled_error.push_back(worst);
        ok = ok && full && worst <= tolerance;
        msg << (i ? " " : "") << worst;
    }
    res.check = {"hover regulation", ok, "settled error per episode [m]: " + msg.str()};
    return res;
}

struct TrackTestResult {
    CheckResult check;
    double med = 0.0;
    double relative_med = 0.0;
    RunOutput run;
};

/// Lemniscate tracking in LV mode with velocity feed-forward, `laps` laps.
/// The MED over the whole run is normalized by the 3 m lemniscate scale.
inline TrackTestResult track_test(EnvConfig cfg, double speed = 1.6, double laps = 2.0, double tolerance = 0.05) {
    cfg.task = TaskKind::Tracking;
    cfg.mode = ControlMode::LV;
    cfg.task_params.track_speed = speed;
    cfg.dr.temporal.enabled = false;
    cfg.dr.wind_sigma = 0.0;
    cfg.dr.wind_jitter_sigma = 0.0;
    const double lap_time = lemniscate_lap_length() / speed;
    cfg.max_episode_steps = static_cast<std::size_t>(std::lround(laps * lap_time / cfg.dt));
    TrackTestResult res;
    res.run = run_episodes(cfg, {1, nullptr, 0.0, false});
    res.med = res.run.summary.med;
    res.relative_med = res.med / 3.0;
    const bool ok = res.run.summary.outcomes[0] == EpisodeOutcome::TimedOut && res.relative_med <= tolerance;
    std::ostringstream msg;
    msg.precision(4);
    msg << "MED " << res.med << " m, relative " << res.relative_med << " (limit " << tolerance << ")";
    res.check = {"lemniscate tracking", ok, msg.str()};
    return res;
}

/// Default mode per task for the regression run.
inline ControlMode regression_mode(TaskKind t) {
    switch (t) {
        case TaskKind::Hovering: return ControlMode::CTBR;
        case TaskKind::Tracking: return ControlMode::LV;
        case TaskKind::TargetHitting: return ControlMode::PY;
        case TaskKind::Avoidance: return ControlMode::SRT;
        case TaskKind::Planning: return ControlMode::CTA;
    }
    return ControlMode::PY;
}

/// Runs every task with the scripted pilot and full domain randomization and
/// returns each task's trace text.
inline std::vector<std::pair<TaskKind, std::string>> regression_traces(EnvConfig base, std::uint64_t seed,
                                                                       std::size_t episodes = 2,
                                                                       std::size_t max_steps = 300) {
    std::vector<std::pair<TaskKind, std::string>> out;
    for (TaskKind t : kAllTasks) {
        EnvConfig cfg = base;
        cfg.task = t;
        cfg.mode = regression_mode(t);
        cfg.seed = seed;
        cfg.max_episode_steps = max_steps;
        cfg.dr.init_attitude_sigma = 0.05;
        cfg.dr.init_velocity_sigma = 0.1;
        cfg.dr.wind_sigma = 0.05;
        cfg.dr.wind_jitter_sigma = 0.02;
        cfg.dr.temporal.enabled = true;
        cfg.dr.depth = {0.02, 0.02, 0.5, 0.05, 0.05};
        const RunOutput run = run_episodes(cfg, {episodes, nullptr, 0.0, true});
        std::ostringstream os;
        write_trace(os, run.records);
        out.emplace_back(t, os.str());
    }
    return out;
}

}  // namespace quadgym
