#include "gridloop/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gridloop/profile.hpp"

namespace gridloop::orch {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const std::string& field, std::string_view value) {
    throw ValidationError(field + ": bad value '" + std::string(value) + "'");
}

double number(const std::string& field, std::string_view value) {
    double v;
    if (!parse_double(value, v)) bad_value(field, value);
    return v;
}

double positive(const std::string& field, std::string_view value) {
    double v = number(field, value);
    if (v <= 0) throw ValidationError(field + ": must be > 0");
    return v;
}

std::int64_t integer(const std::string& field, std::string_view value) {
    std::int64_t v;
    if (!parse_i64(value, v)) bad_value(field, value);
    return v;
}

std::vector<std::pair<int, int>> parse_edges(const std::string& field,
                                             std::string_view value, int n) {
    std::vector<std::pair<int, int>> edges;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        auto dash = token.find('-');
        std::int64_t a, b;
        if (dash == std::string::npos || !parse_i64(std::string_view(token).substr(0, dash), a) ||
            !parse_i64(std::string_view(token).substr(dash + 1), b))
            bad_value(field, token);
        if (a < 1 || b < 1 || a > n || b > n)
            throw ValidationError(field + ": agent id out of 1.." + std::to_string(n));
        if (a == b) throw ValidationError(field + ": self-loop " + token);
        edges.emplace_back(static_cast<int>(std::min(a, b)) - 1,
                           static_cast<int>(std::max(a, b)) - 1);
        token.clear();
    };
    for (char c : value) {
        if (c == ',' || c == ' ' || c == '\t') {
            flush();
        } else {
            token += c;
        }
    }
    flush();
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::pair<int, int>> ring_edges(int n) {
    std::vector<std::pair<int, int>> edges;
    if (n == 2) return {{0, 1}};
    for (int i = 0; i < n; ++i) {
        int j = (i + 1) % n;
        edges.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

struct RawSection {
    std::string name; // "run", "link.wan", "disturbance", ...
    int line = 0;
    std::vector<std::pair<std::string, std::string>> entries;
};

const std::string* find(const RawSection& sec, const std::string& key) {
    for (const auto& [k, v] : sec.entries)
        if (k == key) return &v;
    return nullptr;
}

} // namespace

Scenario parse_scenario(std::string_view text, const ParseOptions& opts) {
    std::vector<RawSection> sections;
    std::set<std::string> seen_sections;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        auto hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string_view line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw SyntaxError("line " + std::to_string(line_no) + ": bad section header");
            std::string name(trim(line.substr(1, line.size() - 2)));
            if (name != "disturbance" && !seen_sections.insert(name).second)
                throw SyntaxError("line " + std::to_string(line_no) + ": duplicate section [" +
                                  name + "]");
            sections.push_back({name, line_no, {}});
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw SyntaxError("line " + std::to_string(line_no) + ": expected key = value");
        if (sections.empty())
            throw SyntaxError("line " + std::to_string(line_no) + ": key outside any section");
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty())
            throw SyntaxError("line " + std::to_string(line_no) + ": empty key");
        if (find(sections.back(), key))
            throw SyntaxError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                              "' in [" + sections.back().name + "]");
        sections.back().entries.emplace_back(std::move(key), std::move(value));
    }

    Scenario s;
    bool f0_given = false;
    bool edges_given = false;
    std::string edges_text;

    auto link_model = [&](RawSection& sec, netem::DelayModel& m) {
        const std::string prefix = sec.name + ".";
        for (auto& [key, value] : sec.entries) {
            const std::string field = prefix + key;
            if (key == "base_ms") m.base_ms = number(field, value);
            else if (key == "jitter_std_ms") m.jitter_std_ms = number(field, value);
            else if (key == "spike_prob") m.spike_prob = number(field, value);
            else if (key == "spike_lo_ms") m.spike_lo_ms = number(field, value);
            else if (key == "spike_hi_ms") m.spike_hi_ms = number(field, value);
            else if (key == "mode") {
                if (value == "stream") m.mode = netem::LinkMode::stream;
                else if (value == "datagram") m.mode = netem::LinkMode::datagram;
                else bad_value(field, value);
            } else throw ValidationError(field + ": unknown key");
        }
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(prefix + "*: " + e.what());
        }
    };

    for (auto& sec : sections) {
        if (sec.name == "run") {
            for (auto& [key, value] : sec.entries) {
                const std::string field = "run." + key;
                if (key == "horizon_s") {
                    double h = number(field, value);
                    if (h < 0) throw ValidationError(field + ": must be >= 0");
                    s.horizon_us = seconds_to_micros(h);
                } else if (key == "mode") {
                    if (value == "virtual") s.mode = RunMode::virtual_time;
                    else if (value == "realtime") s.mode = RunMode::realtime;
                    else bad_value(field, value);
                } else if (key == "seed") {
                    if (!parse_u64(value, s.seed)) bad_value(field, value);
                } else if (key == "emission_period_s") {
                    s.emission_period_us = seconds_to_micros(positive(field, value));
                } else if (key == "out_dir") {
                    if (value.empty()) throw ValidationError(field + ": must not be empty");
                    s.out_dir = value;
                } else if (key == "hub") {
                    if (value.find(':') == std::string::npos)
                        throw ValidationError(field + ": expected host:port");
                    s.hub_addr = value;
                } else throw ValidationError(field + ": unknown key");
            }
        } else if (sec.name == "link.wan") {
            link_model(sec, s.wan);
        } else if (sec.name == "link.lan") {
            link_model(sec, s.lan);
        } else if (sec.name == "link.mesh") {
            link_model(sec, s.mesh);
        } else if (sec.name == "profiles") {
            for (auto& [key, value] : sec.entries) {
                const std::string field = "profiles." + key;
                if (key == "pv" || key == "building") {
                    std::string path = value == "builtin" ? std::string{} : value;
                    if (!path.empty()) {
                        std::filesystem::path pp(path);
                        if (pp.is_relative()) pp = std::filesystem::path(opts.base_dir) / pp;
                        path = pp.lexically_normal().string();
                        if (opts.check_files && !std::filesystem::exists(pp))
                            throw gateway::MissingFile(field + ": no such file: " + path);
                    }
                    (key == "pv" ? s.pv_path : s.building_path) = path;
                } else if (key == "window_start_s") {
                    double v = number(field, value);
                    if (v < 0) throw ValidationError(field + ": must be >= 0");
                    s.window_start_us = seconds_to_micros(v);
                } else if (key == "window_end_s") {
                    s.window_end_us = seconds_to_micros(positive(field, value));
                } else throw ValidationError(field + ": unknown key");
            }
        } else if (sec.name == "grid") {
            for (auto& [key, value] : sec.entries) {
                const std::string field = "grid." + key;
                if (key == "ess_count") {
                    auto v = integer(field, value);
                    if (v < 1) throw ValidationError(field + ": need at least one unit");
                    s.ess_count = static_cast<int>(v);
                } else if (key == "droop_hz_per_pu") s.droop_hz_per_pu = positive(field, value);
                else if (key == "p_set_pu") s.p_set_pu = number(field, value);
                else if (key == "p_min_pu") s.p_min_pu = number(field, value);
                else if (key == "p_max_pu") s.p_max_pu = number(field, value);
                else if (key == "tau_f_s") s.tau_f_s = positive(field, value);
                else if (key == "dt_s") s.dt_s = positive(field, value);
                else if (key == "damping_pu_per_hz") {
                    s.damping_pu_per_hz = number(field, value);
                    if (s.damping_pu_per_hz < 0) throw ValidationError(field + ": must be >= 0");
                } else if (key == "s_base_w") s.s_base_w = positive(field, value);
                else if (key == "f_nom_hz") s.f_nom_hz = positive(field, value);
                else if (key == "load2_pu") {
                    s.load2_pu = number(field, value);
                    if (s.load2_pu < 0) throw ValidationError(field + ": must be >= 0");
                } else if (key == "f0_hz") {
                    s.f0_hz = positive(field, value);
                    f0_given = true;
                } else throw ValidationError(field + ": unknown key");
            }
        } else if (sec.name == "agents") {
            for (auto& [key, value] : sec.entries) {
                const std::string field = "agents." + key;
                if (key == "edges") {
                    edges_given = true;
                    edges_text = value;
                } else if (key == "k_s") s.k_s = number(field, value);
                else if (key == "eps_hz") s.eps_hz = positive(field, value);
                else if (key == "quiet_rounds") {
                    auto v = integer(field, value);
                    if (v < 1) throw ValidationError(field + ": must be >= 1");
                    s.quiet_rounds = static_cast<int>(v);
                } else if (key == "max_iter") {
                    auto v = integer(field, value);
                    if (v < 1) throw ValidationError(field + ": must be >= 1");
                    s.max_iter = static_cast<int>(v);
                } else if (key == "period_s") {
                    s.agent_period_us = seconds_to_micros(positive(field, value));
                } else if (key == "offset_s") {
                    double v = number(field, value);
                    if (v < 0) throw ValidationError(field + ": must be >= 0");
                    s.agent_offset_us = seconds_to_micros(v);
                } else if (key == "transport") {
                    if (value == "mesh") s.transport = mas::AgentFleet::Transport::mesh;
                    else if (value == "hub") s.transport = mas::AgentFleet::Transport::hub;
                    else bad_value(field, value);
                } else throw ValidationError(field + ": unknown key");
            }
        } else if (sec.name == "disturbance") {
            DisturbanceSpec d;
            bool t_given = false;
            for (auto& [key, value] : sec.entries) {
                const std::string field = "disturbance." + key;
                if (key == "t_s") {
                    double v = number(field, value);
                    if (v < 0) throw ValidationError(field + ": must be >= 0");
                    d.t_us = seconds_to_micros(v);
                    t_given = true;
                } else if (key == "action") {
                    if (value == "connect") d.action = grid::Action::connect;
                    else if (value == "disconnect") d.action = grid::Action::disconnect;
                    else bad_value(field, value);
                } else if (key == "target") {
                    if (value == "pv") d.target = grid::Target::pv;
                    else if (value == "building") d.target = grid::Target::building;
                    else if (value == "load2") d.target = grid::Target::load2;
                    else bad_value(field, value);
                } else if (key == "site") {
                    if (value == "sim") d.site = Site::sim;
                    else if (value == "gateway") d.site = Site::gateway;
                    else bad_value(field, value);
                } else throw ValidationError(field + ": unknown key");
            }
            if (!t_given) throw ValidationError("disturbance.t_s: required");
            s.disturbances.push_back(d);
        } else {
            throw ValidationError("[" + sec.name + "]: unknown section");
        }
    }

    if (!f0_given) s.f0_hz = s.f_nom_hz;
    if (edges_given && edges_text != "ring") {
        s.edges = parse_edges("agents.edges", edges_text, s.ess_count);
    } else {
        s.edges = ring_edges(s.ess_count);
    }

    // cross-field checks
    if (s.window_start_us >= s.window_end_us)
        throw ValidationError("profiles.window_start_s: must be before window_end_s");
    if (s.p_min_pu > 0 || s.p_max_pu < 0)
        throw ValidationError("grid.p_min_pu/p_max_pu: capacity must bracket 0");
    if (s.max_iter < s.quiet_rounds)
        throw ValidationError("agents.max_iter: must be >= quiet_rounds");
    if (s.ess_count > 1) {
        try {
            mas::metropolis_weights(mas::adjacency_from_edges(s.ess_count, s.edges));
        } catch (const mas::DisconnectedGraph&) {
            throw ValidationError("agents.edges: graph is not connected");
        } catch (const std::invalid_argument& e) {
            throw ValidationError(std::string("agents.edges: ") + e.what());
        }
    }
    std::stable_sort(s.disturbances.begin(), s.disturbances.end(),
                     [](const DisturbanceSpec& a, const DisturbanceSpec& b) {
                         return a.t_us < b.t_us;
                     });
    for (const auto& d : s.disturbances) {
        if (d.t_us > s.horizon_us)
            throw ValidationError("disturbance.t_s: beyond the run horizon");
        if (d.site == Site::gateway && d.target == grid::Target::load2)
            throw ValidationError("disturbance.site: load2 has no gateway device");
    }
    return s;
}

Scenario load_scenario_file(const std::string& path, bool check_files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw gateway::MissingFile("scenario file not found: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    ParseOptions opts;
    opts.base_dir = std::filesystem::path(path).parent_path().string();
    if (opts.base_dir.empty()) opts.base_dir = ".";
    opts.check_files = check_files;
    return parse_scenario(buf.str(), opts);
}

namespace {

std::string seconds(Micros us) { return format_double(static_cast<double>(us) / 1e6); }

void print_link(std::string& out, const char* name, const netem::DelayModel& m) {
    out += std::string("[link.") + name + "]\n";
    out += "base_ms = " + format_double(m.base_ms) + "\n";
    out += "jitter_std_ms = " + format_double(m.jitter_std_ms) + "\n";
    out += "spike_prob = " + format_double(m.spike_prob) + "\n";
    out += "spike_lo_ms = " + format_double(m.spike_lo_ms) + "\n";
    out += "spike_hi_ms = " + format_double(m.spike_hi_ms) + "\n";
    out += std::string("mode = ") +
           (m.mode == netem::LinkMode::stream ? "stream" : "datagram") + "\n\n";
}

} // namespace

std::string print_scenario(const Scenario& s) {
    std::string out;
    out += "[run]\n";
    out += "horizon_s = " + seconds(s.horizon_us) + "\n";
    out += std::string("mode = ") +
           (s.mode == RunMode::virtual_time ? "virtual" : "realtime") + "\n";
    out += "seed = " + std::to_string(s.seed) + "\n";
    out += "emission_period_s = " + seconds(s.emission_period_us) + "\n";
    out += "out_dir = " + s.out_dir + "\n";
    out += "hub = " + s.hub_addr + "\n\n";

    print_link(out, "wan", s.wan);
    print_link(out, "lan", s.lan);
    print_link(out, "mesh", s.mesh);

    out += "[profiles]\n";
    out += "pv = " + (s.pv_path.empty() ? "builtin" : s.pv_path) + "\n";
    out += "building = " + (s.building_path.empty() ? "builtin" : s.building_path) + "\n";
    out += "window_start_s = " + seconds(s.window_start_us) + "\n";
    out += "window_end_s = " + seconds(s.window_end_us) + "\n\n";

    out += "[grid]\n";
    out += "ess_count = " + std::to_string(s.ess_count) + "\n";
    out += "droop_hz_per_pu = " + format_double(s.droop_hz_per_pu) + "\n";
    out += "p_set_pu = " + format_double(s.p_set_pu) + "\n";
    out += "p_min_pu = " + format_double(s.p_min_pu) + "\n";
    out += "p_max_pu = " + format_double(s.p_max_pu) + "\n";
    out += "tau_f_s = " + format_double(s.tau_f_s) + "\n";
    out += "dt_s = " + format_double(s.dt_s) + "\n";
    out += "damping_pu_per_hz = " + format_double(s.damping_pu_per_hz) + "\n";
    out += "s_base_w = " + format_double(s.s_base_w) + "\n";
    out += "f_nom_hz = " + format_double(s.f_nom_hz) + "\n";
    out += "load2_pu = " + format_double(s.load2_pu) + "\n";
    out += "f0_hz = " + format_double(s.f0_hz) + "\n\n";

    out += "[agents]\n";
    out += "edges = ";
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s.edges[i].first + 1) + "-" +
               std::to_string(s.edges[i].second + 1);
    }
    out += "\n";
    out += "k_s = " + format_double(s.k_s) + "\n";
    out += "eps_hz = " + format_double(s.eps_hz) + "\n";
    out += "quiet_rounds = " + std::to_string(s.quiet_rounds) + "\n";
    out += "max_iter = " + std::to_string(s.max_iter) + "\n";
    out += "period_s = " + seconds(s.agent_period_us) + "\n";
    out += "offset_s = " + seconds(s.agent_offset_us) + "\n";
    out += std::string("transport = ") +
           (s.transport == mas::AgentFleet::Transport::mesh ? "mesh" : "hub") + "\n";

    for (const auto& d : s.disturbances) {
        out += "\n[disturbance]\n";
        out += "t_s = " + seconds(d.t_us) + "\n";
        out += std::string("action = ") +
               (d.action == grid::Action::connect ? "connect" : "disconnect") + "\n";
        out += std::string("target = ") +
               (d.target == grid::Target::pv ? "pv"
                : d.target == grid::Target::building ? "building"
                                                     : "load2") + "\n";
        out += std::string("site = ") + (d.site == Site::sim ? "sim" : "gateway") + "\n";
    }
    return out;
}

} // namespace gridloop::orch
