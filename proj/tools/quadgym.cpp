// quadgym command-line tool.

#include "quadgym/bridge.hpp"
#include "quadgym/config.hpp"
#include "quadgym/experiments.hpp"
#include "quadgym/policy.hpp"
#include "quadgym/trace.hpp"
#include "quadgym/world.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace quadgym;
using json = nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void emit(const json& summary, const std::string& path) {
    std::cout << summary.dump(2) << '\n';
    if (!path.empty()) std::ofstream(path) << summary.dump(2) << '\n';
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

// x,y,z[,yaw] or x,y,z,qw,qx,qy,qz
Pose parse_pose(const std::string& s) {
    const auto v = parse_list(s);
    Pose p;
    if (v.size() != 3 && v.size() != 4 && v.size() != 7) throw std::invalid_argument("--pose needs 3, 4 or 7 numbers");
    p.position = {v[0], v[1], v[2]};
    if (v.size() == 4) p.attitude = Quat::from_yaw(v[3]);
    if (v.size() == 7) {
        const Quat q{v[3], v[4], v[5], v[6]};
        if (!(q.norm() > 0.0)) throw std::invalid_argument("--pose quaternion has zero norm");
        p.attitude = q.normalized();
    }
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vectorized quadrotor simulator"};
    app.require_subcommand(1);
    std::string config_path, summary_path;
    app.add_option("--config", config_path, "JSON config overlay");
    app.add_option("--summary", summary_path, "also write the JSON summary here");

    auto* run = app.add_subcommand("run", "run episodes with a policy or the scripted cascade pilot");
    std::optional<std::string> task, mode;
    std::string policy_path, out_path;
    std::size_t episodes = 8;
    std::optional<std::uint64_t> seed;
    double lead = 0.0;
    run->add_option("--task", task, "hovering|tracking|target_hitting|avoidance|planning");
    run->add_option("--mode", mode, "PY|LV|CTA|CTBR|SRT");
    run->add_option("--policy", policy_path, "weights JSON; scripted pilot when omitted");
    run->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
    run->add_option("--seed", seed);
    run->add_option("--out", out_path, "trace file");
    run->add_option("--lead", lead, "pilot feed-forward lead, s");

    auto* hover = app.add_subcommand("hover-test", "hover regulation from random starts");
    std::optional<std::uint64_t> hover_seed;
    hover->add_option("--seed", hover_seed);

    auto* track = app.add_subcommand("track-test", "lemniscate tracking");
    double speed = 1.6, laps = 2.0;
    track->add_option("--speed", speed)->check(CLI::PositiveNumber);
    track->add_option("--laps", laps)->check(CLI::PositiveNumber);

    auto* dump = app.add_subcommand("depth-dump", "render a depth image of a scene");
    std::string scene_path, pose_str = "0,0,1", depth_out;
    dump->add_option("--scene", scene_path, "scene JSON")->required();
    dump->add_option("--pose", pose_str, "camera pose x,y,z[,yaw] or x,y,z,qw,qx,qy,qz");
    dump->add_option("--out", depth_out, "raw depth file")->required();

    auto* regress = app.add_subcommand("regress", "scripted runs of all tasks, one trace per task");
    std::string regress_dir = "regress";
    std::uint64_t regress_seed = 0;
    regress->add_option("--out-dir", regress_dir);
    regress->add_option("--seed", regress_seed);

    auto* serve = app.add_subcommand("serve", "serve the batched environment over a local socket");
    std::string socket_path = "/tmp/quadgym.sock";
    std::size_t sessions = 0;
    serve->add_option("--socket", socket_path);
    serve->add_option("--sessions", sessions, "stop after this many clients (0: run forever)");
    serve->add_option("--task", task);
    serve->add_option("--mode", mode);
    serve->add_option("--seed", seed);

    auto* show = app.add_subcommand("config", "print the effective configuration as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        EnvConfig cfg = load_config(config_path);
        const auto t0 = std::chrono::steady_clock::now();

        if (*show) {
            std::cout << to_json(cfg).dump(2) << '\n';
            return 0;
        }
        if (*run) {
            if (task) cfg.task = task_from_string(*task);
            if (mode) cfg.mode = control_mode_from_string(*mode);
            if (seed) cfg.seed = *seed;
            std::optional<PolicyWeights> policy;
            if (!policy_path.empty()) policy = load_policy(policy_path);
            const RunOutput r = run_episodes(cfg, {episodes, policy ? &*policy : nullptr, lead, !out_path.empty()});
            if (!out_path.empty()) {
                std::ofstream os(out_path);
                if (!os) throw std::runtime_error("cannot write " + out_path);
                write_trace(os, r.records);
            }
            json s = r.summary.to_json();
            s["command"] = "run";
            s["seed"] = cfg.seed;
            s["policy"] = policy_path.empty() ? "scripted" : policy_path;
            s["trace"] = out_path;
            s["runtime_s"] = seconds_since(t0);
            s["passed"] = true;
            emit(s, summary_path);
            return 0;
        }
        if (*hover) {
            if (hover_seed) cfg.seed = *hover_seed;
            const HoverTestResult h = hover_test(cfg);
            const double rt = seconds_since(t0);
            const bool ok = h.check.passed && rt < 10.0;
            emit({{"command", "hover-test"},
                  {"passed", ok},
                  {"tolerance_m", 0.1},
                  {"settled_error_m", h.settled_error},
                  {"runtime_s", rt},
                  {"runtime_limit_s", 10.0}},
                 summary_path);
            return ok ? 0 : 1;
        }
        if (*track) {
            const TrackTestResult t = track_test(cfg, speed, laps);
            const double rt = seconds_since(t0);
            const bool ok = t.check.passed && rt < 30.0;
            emit({{"command", "track-test"},
                  {"passed", ok},
                  {"speed", speed},
                  {"laps", laps},
                  {"med_m", t.med},
                  {"relative_med", t.relative_med},
                  {"limit", 0.05},
                  {"runtime_s", rt},
                  {"runtime_limit_s", 30.0}},
                 summary_path);
            return ok ? 0 : 1;
        }
        if (*dump) {
            std::ifstream in(scene_path);
            if (!in) throw std::runtime_error("cannot open scene file " + scene_path);
            const Scene scene = scene_from_json(json::parse(in));
            const Pose pose = parse_pose(pose_str);
            const DepthImage img = raycast(scene, pose, cfg.camera);
            {
                std::ofstream os(depth_out, std::ios::binary);
                if (!os) throw std::runtime_error("cannot write " + depth_out);
                write_depth_raw(os, img);
            }
            const std::string preview = depth_ascii(img, cfg.camera.max_range);
            std::ofstream(depth_out + ".txt") << preview;
            std::cerr << preview;
            emit({{"command", "depth-dump"},
                  {"passed", true},
                  {"width", img.width},
                  {"height", img.height},
                  {"center_depth", img.at(img.height / 2, img.width / 2)},
                  {"min_depth", min_depth(img)},
                  {"raw", depth_out},
                  {"preview", depth_out + ".txt"}},
                 summary_path);
            return 0;
        }
        if (*regress) {
            std::filesystem::create_directories(regress_dir);
            json files = json::array();
            for (const auto& [t, text] : regression_traces(cfg, regress_seed)) {
                const std::string path = regress_dir + "/" + std::string(to_string(t)) + ".csv";
                std::ofstream(path) << text;
                files.push_back(path);
            }
            emit({{"command", "regress"}, {"passed", true}, {"seed", regress_seed}, {"traces", files},
                  {"runtime_s", seconds_since(t0)}},
                 summary_path);
            return 0;
        }
        if (*serve) {
            if (task) cfg.task = task_from_string(*task);
            if (mode) cfg.mode = control_mode_from_string(*mode);
            if (seed) cfg.seed = *seed;
            VecEnv env(cfg);
            const bridge::Listener listener(socket_path);
            std::cerr << "serving " << to_string(cfg.task) << " (" << env.num_envs() << " envs, obs " << env.obs_dim()
                      << ", act " << env.act_dim() << ") on " << socket_path << '\n';
            bridge::serve(env, config_hash(cfg), listener, sessions);
            return 0;
        }
    } catch (const std::exception& e) {
        json s = {{"passed", false}, {"error", e.what()}};
        std::cout << s.dump(2) << '\n';
        return 2;
    }
    return 1;
}
