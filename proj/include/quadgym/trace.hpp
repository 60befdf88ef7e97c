#pragma once

// Trace files: comma-separated text with one header row.
//
//   t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,a0..aN,r_<term>...,reward,done,outcome,env
//
// Numbers are written in shortest round-trip form, so parsing a written file
// reproduces every value exactly.

#include "quadgym/dynamics.hpp"
#include "quadgym/tasks.hpp"

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace quadgym {

struct TraceRecord {
    std::size_t env = 0;
    double t = 0.0;
    QuadState state;
    std::vector<double> action;
    std::vector<std::string> term_names;
    std::vector<double> terms;
    double reward = 0.0;
    bool done = false;
    EpisodeOutcome outcome = EpisodeOutcome::Running;

    bool operator==(const TraceRecord& o) const {
        return env == o.env && t == o.t && state.position == o.state.position &&
               state.attitude == o.state.attitude && state.velocity == o.state.velocity &&
               state.body_rate == o.state.body_rate && action == o.action && term_names == o.term_names &&
               terms == o.terms && reward == o.reward && done == o.done && outcome == o.outcome;
    }
};

namespace detail {

inline void put_number(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline double parse_number(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::runtime_error("trace: bad number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline constexpr std::array<std::string_view, 14> kStateColumns{"t",  "px", "py", "pz", "qw", "qx", "qy",
                                                                 "qz", "vx", "vy", "vz", "wx", "wy", "wz"};

}  // namespace detail

inline std::string trace_header(std::size_t act_dim, const std::vector<std::string>& term_names) {
    std::string h;
    for (auto c : detail::kStateColumns) {
        h += c;
        h += ',';
    }
    for (std::size_t i = 0; i < act_dim; ++i) h += "a" + std::to_string(i) + ",";
    for (const auto& n : term_names) h += "r_" + n + ",";
    h += "reward,done,outcome,env";
    return h;
}

/// All records must share the action width and reward term names.
inline void write_trace(std::ostream& os, const std::vector<TraceRecord>& records) {
    if (records.empty()) return;
    const auto& first = records.front();
    os << trace_header(first.action.size(), first.term_names) << '\n';
    std::string line;
    for (const auto& r : records) {
        if (r.action.size() != first.action.size() || r.term_names != first.term_names)
            throw std::invalid_argument("write_trace: records have different layouts");
        line.clear();
        const auto& s = r.state;
        const double vals[14] = {r.t,           s.position.x(), s.position.y(), s.position.z(), s.attitude.w,
                                 s.attitude.x,  s.attitude.y,   s.attitude.z,   s.velocity.x(), s.velocity.y(),
                                 s.velocity.z(), s.body_rate.x(), s.body_rate.y(), s.body_rate.z()};
        for (double v : vals) {
            detail::put_number(line, v);
            line += ',';
        }
        for (double v : r.action) {
            detail::put_number(line, v);
            line += ',';
        }
        for (double v : r.terms) {
            detail::put_number(line, v);
            line += ',';
        }
        detail::put_number(line, r.reward);
        line += r.done ? ",1," : ",0,";
        line += to_string(r.outcome);
        line += ',';
        line += std::to_string(r.env);
        os << line << '\n';
    }
}

inline std::vector<TraceRecord> parse_trace(std::istream& is) {
    std::vector<TraceRecord> out;
    std::string header;
    if (!std::getline(is, header)) return out;
    const auto cols = detail::split(header);
    if (cols.size() < detail::kStateColumns.size() + 4) throw std::runtime_error("trace: header too short");
    for (std::size_t i = 0; i < detail::kStateColumns.size(); ++i)
        if (cols[i] != detail::kStateColumns[i]) throw std::runtime_error("trace: unexpected header");
    std::size_t idx = detail::kStateColumns.size();
    std::size_t act_dim = 0;
    while (idx < cols.size() && cols[idx].size() > 1 && cols[idx][0] == 'a' &&
           cols[idx].find_first_not_of("0123456789", 1) == std::string_view::npos) {
        ++act_dim;
        ++idx;
    }
    std::vector<std::string> names;
    while (idx < cols.size() && cols[idx].starts_with("r_")) names.emplace_back(cols[idx++].substr(2));
    if (cols.size() - idx != 4 || cols[idx] != "reward" || cols[idx + 1] != "done" || cols[idx + 2] != "outcome" ||
        cols[idx + 3] != "env")
        throw std::runtime_error("trace: unexpected trailing columns");

    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = detail::split(line);
        if (f.size() != cols.size()) throw std::runtime_error("trace: row has the wrong number of fields");
        TraceRecord r;
        double v[14];
        for (std::size_t i = 0; i < 14; ++i) v[i] = detail::parse_number(f[i]);
        r.t = v[0];
        r.state.position = {v[1], v[2], v[3]};
        r.state.attitude = {v[4], v[5], v[6], v[7]};
        r.state.velocity = {v[8], v[9], v[10]};
        r.state.body_rate = {v[11], v[12], v[13]};
        std::size_t k = 14;
        for (std::size_t i = 0; i < act_dim; ++i) r.action.push_back(detail::parse_number(f[k++]));
        r.term_names = names;
        for (std::size_t i = 0; i < names.size(); ++i) r.terms.push_back(detail::parse_number(f[k++]));
        r.reward = detail::parse_number(f[k++]);
        r.done = f[k++] == "1";
        r.outcome = outcome_from_string(f[k++]);
        r.env = static_cast<std::size_t>(detail::parse_number(f[k++]));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace quadgym
