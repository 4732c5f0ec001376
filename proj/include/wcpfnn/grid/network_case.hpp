#pragma once

#include <wcpfnn/core/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wcpfnn::grid {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

// All electrical quantities are per unit on NetworkCase::base_mva.
struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double p_demand = 0.0;
    double q_demand = 0.0;
    double v_min = 0.9;
    double v_max = 1.1;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
    double base_kv = 0.0;

    bool is_load() const { return p_demand != 0.0 || q_demand != 0.0; }
};

struct Generator {
    int bus_id = 0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double v_setpoint = 1.0;
    // Currency per MWh (resp. MVArh), as written in the case file.
    double cost_linear = 0.0;
    double cost_linear_q = 0.0;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    // Apparent power rating; 0 means unlimited.
    double rating = 0.0;
};

struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Branch> branches;

    std::size_t num_buses() const { return buses.size(); }
    std::size_t num_generators() const { return generators.size(); }
    std::size_t num_branches() const { return branches.size(); }
    std::size_t num_loads() const {
        return static_cast<std::size_t>(std::count_if(buses.begin(), buses.end(), [](const Bus& b) { return b.is_load(); }));
    }

    // Position of the bus with the given external id.
    std::size_t bus_index(int id) const {
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (buses[i].id == id) return i;
        }
        throw ValidationError("unknown bus id " + std::to_string(id));
    }

    std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (buses[i].type == BusType::Slack) return i;
        }
        throw ValidationError("case has no slack bus");
    }

    // Bus positions of loads, in bus order. Load k owns demand entries k and N_d + k.
    std::vector<std::size_t> load_buses() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (buses[i].is_load()) out.push_back(i);
        }
        return out;
    }

    // Load position of each bus, or nullopt if the bus carries no demand.
    std::vector<std::optional<std::size_t>> load_of_bus() const {
        std::vector<std::optional<std::size_t>> out(buses.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (buses[i].is_load()) out[i] = k++;
        }
        return out;
    }
};

inline void validate(const NetworkCase& c) {
    if (!(c.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
    if (c.buses.empty()) throw ValidationError("case has no buses");
    std::map<int, int> seen;
    int slack_count = 0;
    for (const auto& b : c.buses) {
        if (seen[b.id]++ > 0) throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.type == BusType::Slack) ++slack_count;
        if (b.v_min > b.v_max) throw ValidationError("bus " + std::to_string(b.id) + ": v_min > v_max");
    }
    if (slack_count == 0) throw ValidationError("case has no slack bus");
    if (slack_count > 1) throw ValidationError("case has more than one slack bus");
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& gen = c.generators[g];
        if (!seen.count(gen.bus_id))
            throw ValidationError("generator " + std::to_string(g + 1) + " references unknown bus " + std::to_string(gen.bus_id));
        if (gen.p_min > gen.p_max) throw ValidationError("generator " + std::to_string(g + 1) + ": p_min > p_max");
        if (gen.q_min > gen.q_max) throw ValidationError("generator " + std::to_string(g + 1) + ": q_min > q_max");
    }
    for (std::size_t l = 0; l < c.branches.size(); ++l) {
        const auto& br = c.branches[l];
        if (!seen.count(br.from_bus) || !seen.count(br.to_bus))
            throw ValidationError("branch " + std::to_string(l + 1) + " references an unknown bus");
        if (br.r * br.r + br.x * br.x <= 0.0)
            throw ValidationError("branch " + std::to_string(l + 1) + " has zero impedance");
    }
}

}  // namespace wcpfnn::grid
