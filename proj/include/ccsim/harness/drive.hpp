/**
 * Orchestrated (non-sweep) runs. A drive config names the scenario, the
 * deployment topology, and optionally the participating hosts. With no
 * remote hosts the configured component set launches locally,
 * process-per-role; with hosts declared, drive prints the per-host launch
 * plan for manual multi-host execution instead of launching anything.
 */
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccsim/harness/experiment.hpp"

namespace ccsim {

enum class Topology { A_Replicated, B_Split, C_SplitReversed, Custom };

inline const char* to_string(Topology t) {
    switch (t) {
        case Topology::A_Replicated: return "A";
        case Topology::B_Split: return "B";
        case Topology::C_SplitReversed: return "C";
        case Topology::Custom: return "custom";
    }
    return "?";
}

struct HostDecl {
    std::string name;
    std::string address;
};

struct DriveConfig {
    std::string scenario_path;
    Topology topology = Topology::A_Replicated;
    int clients = 1;
    double duration_s = 0.0; // 0 = scenario duration
    double time_scale = 1.0;
    bool padding = false;
    std::uint32_t fps = 0;
    std::uint64_t seed = 0;
    std::string out_dir = "ccsim-drive";
    std::string models_path;
    std::string criteria_path;
    std::vector<HostDecl> hosts;
    // Custom topology: role -> host name, each role exactly once
    std::map<std::string, std::string> role_hosts;
};

inline DriveConfig parse_drive_config(const std::string& text) {
    DriveConfig cfg;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("drive:" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section");
            section = line.substr(1, line.size() - 2);
            if (section == "host") cfg.hosts.push_back({});
            else if (section != "drive") fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (section == "drive") {
            if (key == "scenario") cfg.scenario_path = val;
            else if (key == "topology") {
                if (val == "A") cfg.topology = Topology::A_Replicated;
                else if (val == "B") cfg.topology = Topology::B_Split;
                else if (val == "C") cfg.topology = Topology::C_SplitReversed;
                else if (val == "custom") cfg.topology = Topology::Custom;
                else fail("topology must be A|B|C|custom");
            } else if (key == "clients") cfg.clients = static_cast<int>(detail::parse_num(val, line_no));
            else if (key == "duration_s") cfg.duration_s = detail::parse_num(val, line_no);
            else if (key == "time_scale") cfg.time_scale = detail::parse_num(val, line_no);
            else if (key == "padding") cfg.padding = (val == "on" || val == "true");
            else if (key == "fps") cfg.fps = static_cast<std::uint32_t>(detail::parse_num(val, line_no));
            else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_num(val, line_no));
            else if (key == "out") cfg.out_dir = val;
            else if (key == "models") cfg.models_path = val;
            else if (key == "criteria") cfg.criteria_path = val;
            else if (key == "server_host" || key == "inference_host" || key == "detector_host" ||
                     key == "clients_host") {
                if (cfg.role_hosts.count(key)) fail("duplicate role assignment '" + key + "'");
                cfg.role_hosts[key] = val;
            } else fail("unknown drive key '" + key + "'");
        } else if (section == "host") {
            if (cfg.hosts.empty()) fail("host key outside [host]");
            if (key == "name") cfg.hosts.back().name = val;
            else if (key == "address") cfg.hosts.back().address = val;
            else fail("unknown host key '" + key + "'");
        }
    }
    if (cfg.scenario_path.empty()) throw std::runtime_error("drive: scenario is required");
    if (cfg.clients < 1) throw std::runtime_error("drive: clients must be >= 1");
    return cfg;
}

inline DriveConfig load_drive_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open drive config '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_drive_config(ss.str());
}

// Per-host launch plan for manual multi-host runs. Ports use a fixed
// scheme so the printed commands compose.
inline std::string drive_plan(const DriveConfig& cfg) {
    if (cfg.hosts.size() < 2)
        throw std::runtime_error("drive plan needs at least two [host] declarations");

    const auto host_by_name = [&](const std::string& name) -> const HostDecl& {
        for (const auto& h : cfg.hosts)
            if (h.name == name) return h;
        throw std::runtime_error("drive: unknown host '" + name + "'");
    };

    // role placement per topology; detector rides with the server so the
    // ground-truth stream and client reports stay host-local
    std::string server_host, infer_host, detector_host, clients_host;
    switch (cfg.topology) {
        case Topology::A_Replicated:
            server_host = infer_host = detector_host = clients_host = cfg.hosts[0].name;
            break;
        case Topology::B_Split:
            server_host = detector_host = clients_host = cfg.hosts[0].name;
            infer_host = cfg.hosts[1].name;
            break;
        case Topology::C_SplitReversed:
            server_host = detector_host = clients_host = cfg.hosts[1].name;
            infer_host = cfg.hosts[0].name;
            break;
        case Topology::Custom: {
            for (const char* role : {"server_host", "inference_host", "detector_host", "clients_host"})
                if (!cfg.role_hosts.count(role))
                    throw std::runtime_error(std::string("drive: custom topology must assign ") + role);
            server_host = cfg.role_hosts.at("server_host");
            infer_host = cfg.role_hosts.at("inference_host");
            detector_host = cfg.role_hosts.at("detector_host");
            clients_host = cfg.role_hosts.at("clients_host");
            break;
        }
    }

    const std::string server_addr = host_by_name(server_host).address;
    const std::string infer_addr = host_by_name(infer_host).address;
    const std::string detector_addr = host_by_name(detector_host).address;
    const bool shared_clock = server_host == clients_host;

    std::ostringstream o;
    o << "# launch plan: topology " << to_string(cfg.topology) << ", " << cfg.clients
      << " client(s), scenario " << cfg.scenario_path << "\n";
    auto section = [&](const std::string& host_name) -> std::ostringstream& {
        o << "\n# --- host " << host_name << " (" << host_by_name(host_name).address << ")\n";
        return o;
    };

    // replicated topology: every host runs the full stack independently
    const auto emit_stack = [&](const std::string& saddr, const std::string& iaddr,
                                const std::string& daddr, bool clock) {
        o << "ccsim-detector --listen-gt " << daddr << ":7101 --listen-est " << daddr
          << ":7102 --out mismatches/";
        if (!cfg.criteria_path.empty()) o << " --criteria " << cfg.criteria_path;
        if (!clock) o << " --shared-clock off";
        o << "\n";
        o << "ccsim-infer --listen " << iaddr << ":7103 --scenario " << cfg.scenario_path;
        if (!cfg.models_path.empty()) o << " --models " << cfg.models_path;
        o << "\n";
        o << "ccsim-server --scenario " << cfg.scenario_path << " --listen-clients " << saddr
          << ":7100 --detector " << daddr << ":7101";
        if (cfg.padding) o << " --padding";
        if (cfg.fps) o << " --fps " << cfg.fps;
        if (cfg.seed) o << " --seed " << cfg.seed;
        o << "\n";
        o << "ccsim-client --server " << saddr << ":7100 --inference " << iaddr
          << ":7103 --detector " << daddr << ":7102 --count " << cfg.clients << "\n";
    };

    if (cfg.topology == Topology::A_Replicated) {
        for (const auto& h : cfg.hosts) {
            section(h.name);
            emit_stack(h.address, h.address, h.address, true);
        }
        return o.str();
    }

    // split topologies: group commands by host
    std::map<std::string, std::vector<std::string>> per_host;
    {
        std::ostringstream c;
        c << "ccsim-detector --listen-gt " << detector_addr << ":7101 --listen-est "
          << detector_addr << ":7102 --out mismatches/";
        if (!cfg.criteria_path.empty()) c << " --criteria " << cfg.criteria_path;
        if (!shared_clock) c << " --shared-clock off";
        per_host[detector_host].push_back(c.str());
    }
    {
        std::ostringstream c;
        c << "ccsim-infer --listen " << infer_addr << ":7103 --scenario " << cfg.scenario_path;
        if (!cfg.models_path.empty()) c << " --models " << cfg.models_path;
        per_host[infer_host].push_back(c.str());
    }
    {
        std::ostringstream c;
        c << "ccsim-server --scenario " << cfg.scenario_path << " --listen-clients " << server_addr
          << ":7100 --detector " << detector_addr << ":7101";
        if (cfg.padding) c << " --padding";
        if (cfg.fps) c << " --fps " << cfg.fps;
        if (cfg.seed) c << " --seed " << cfg.seed;
        per_host[server_host].push_back(c.str());
    }
    {
        std::ostringstream c;
        c << "ccsim-client --server " << server_addr << ":7100 --inference " << infer_addr
          << ":7103 --detector " << detector_addr << ":7102 --count " << cfg.clients;
        per_host[clients_host].push_back(c.str());
    }
    for (const auto& h : cfg.hosts) {
        if (!per_host.count(h.name)) continue;
        section(h.name);
        for (const auto& cmd : per_host[h.name]) o << cmd << "\n";
    }
    return o.str();
}

// Local orchestrated run: process-per-role on this machine.
inline MetricsReport drive_local(const DriveConfig& cfg, const std::string& bin_dir) {
    ExperimentConfig run;
    run.bin_dir = bin_dir;
    run.scenario_path = cfg.scenario_path;
    run.out_dir = cfg.out_dir;
    run.clients = cfg.clients;
    run.duration_s = cfg.duration_s;
    run.time_scale = cfg.time_scale;
    run.padding = cfg.padding;
    run.fps = cfg.fps;
    run.seed = cfg.seed;
    run.models_path = cfg.models_path;
    run.criteria_path = cfg.criteria_path;
    run.warmup_s = 0.0; // drive reports the whole run
    return run_experiment(run);
}

} // namespace ccsim
