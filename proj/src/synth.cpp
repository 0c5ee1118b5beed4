#include "icsd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace icsd {

namespace {

struct Channels {
    // indices into the feature row; -1 when the channel does not exist
    int t1_level = 0, t1_flow = 1, t1_valve = 2, t1_pump = 3;
    int t2_level = -1, t2_flow = -1, t2_valve = -1, t2_pump = -1;
};

std::vector<FeatureMeta> make_meta(const ProcessConfig& cfg) {
    std::vector<FeatureMeta> meta;
    auto level = [](const std::string& n, double cap) {
        FeatureMeta m;
        m.name = n;
        m.valid_lo = 0.0;
        m.valid_hi = cap;
        return m;
    };
    auto flow = [](const std::string& n, double rate) {
        FeatureMeta m;
        m.name = n;
        m.valid_lo = 0.0;
        m.valid_hi = rate * 1.5;
        return m;
    };
    auto actuator = [](const std::string& n) {
        FeatureMeta m;
        m.name = n;
        m.kind = FeatureKind::binary;
        m.valid_lo = 0.0;
        m.valid_hi = 1.0;
        return m;
    };
    meta.push_back(level("T1_LEVEL", cfg.tank1.capacity));
    meta.push_back(flow("T1_FLOW_IN", cfg.inflow_rate));
    meta.push_back(actuator("T1_VALVE"));
    meta.push_back(actuator("T1_PUMP"));
    if (cfg.tanks == 2) {
        meta.push_back(level("T2_LEVEL", cfg.tank2.capacity));
        meta.push_back(flow("T2_FLOW_IN", cfg.transfer_rate));
        meta.push_back(actuator("T2_VALVE"));
        meta.push_back(actuator("T2_PUMP"));
    }
    return meta;
}

struct ActiveAttack {
    const Attack* attack;
    int channel; // resolved feature index, -1 for rate_scale
};

void validate_script(const AttackScript& script, const std::vector<FeatureMeta>& meta,
                     size_t steps, const TimeSeriesDataset* base) {
    for (const Attack& a : script.attacks) {
        require(a.start < a.end, "attack interval must be non-empty");
        require(a.end <= steps, "attack interval exceeds the test duration");
        if (a.kind == AttackKind::rate_scale) {
            require(a.value > 0.0, "rate_scale factor must be positive");
            continue;
        }
        int idx = -1;
        for (size_t f = 0; f < meta.size(); ++f)
            if (meta[f].name == a.feature) idx = static_cast<int>(f);
        require(idx >= 0, "attack targets unknown feature: " + a.feature);
        bool binary = meta[idx].kind == FeatureKind::binary;
        if (a.kind == AttackKind::actuator_override)
            require(binary, "actuator_override must target an actuator channel");
        if (a.kind == AttackKind::sensor_spoof_fixed || a.kind == AttackKind::sensor_spoof_offset)
            require(!binary, "sensor spoofs must target a sensor channel");
        if (a.kind == AttackKind::replay_conceal) {
            require(base != nullptr, "replay_conceal requires a base dataset");
            require(a.source_start + (a.end - a.start) <= base->records(),
                    "replay source slice exceeds the base dataset");
        }
    }
    // overlapping intervals on the same feature are ambiguous
    for (size_t i = 0; i < script.attacks.size(); ++i)
        for (size_t j = i + 1; j < script.attacks.size(); ++j) {
            const Attack& a = script.attacks[i];
            const Attack& b = script.attacks[j];
            if (a.kind == AttackKind::rate_scale || b.kind == AttackKind::rate_scale) continue;
            if (a.feature == b.feature && a.start < b.end && b.start < a.end)
                throw ValidationError("overlapping attacks on feature " + a.feature);
        }
}

TimeSeriesDataset run(const ProcessConfig& cfg, size_t steps, uint64_t seed,
                      const AttackScript* script, const TimeSeriesDataset* base,
                      size_t* overflow_steps) {
    require(cfg.tanks == 1 || cfg.tanks == 2, "tanks must be 1 or 2");
    require(cfg.dt > 0.0 && cfg.inflow_rate > 0.0 && cfg.transfer_rate > 0.0 &&
                cfg.demand_rate > 0.0,
            "rates and dt must be positive");
    require(cfg.tank1.low < cfg.tank1.high && cfg.tank2.low < cfg.tank2.high,
            "PLC low threshold must be below high");
    require(steps >= 1, "simulation needs at least one step");

    std::vector<FeatureMeta> meta = make_meta(cfg);
    Channels ch;
    if (cfg.tanks == 2) {
        ch.t2_level = 4;
        ch.t2_flow = 5;
        ch.t2_valve = 6;
        ch.t2_pump = 7;
    }
    const size_t F = meta.size();
    if (script) validate_script(*script, meta, steps, base);

    TimeSeriesDataset ds;
    ds.meta = meta;
    ds.step_seconds = static_cast<int64_t>(std::max(1.0, cfg.dt));
    ds.timestamps.resize(steps);
    ds.features = Matrix(steps, F);
    ds.labels.assign(steps, 0);

    Rng rng(seed);
    double level1 = 0.5 * (cfg.tank1.low + cfg.tank1.high);
    double level2 = 0.5 * (cfg.tank2.low + cfg.tank2.high);
    int v1 = 0, v2 = 0, p1 = 0;
    double demand_phase = 0.0; // advances with the process rate
    size_t overflows = 0;

    auto attack_at = [&](size_t t, AttackKind kind, int channel) -> const Attack* {
        if (!script) return nullptr;
        for (const Attack& a : script->attacks) {
            if (a.kind != kind || t < a.start || t >= a.end) continue;
            if (kind == AttackKind::rate_scale) return &a;
            int idx = -1;
            for (size_t f = 0; f < F; ++f)
                if (meta[f].name == a.feature) idx = static_cast<int>(f);
            if (idx == channel) return &a;
        }
        return nullptr;
    };

    for (size_t t = 0; t < steps; ++t) {
        ds.timestamps[t] = static_cast<int64_t>(t) * ds.step_seconds;

        // sensors: noise is drawn every step for every sensor so the stream
        // is identical with and without attacks; readings saturate at the
        // sensor's physical range
        double s_level1 =
            std::clamp(level1 + rng.gaussian(0.0, cfg.level_noise), 0.0, cfg.tank1.capacity);
        double s_level2 =
            std::clamp(level2 + rng.gaussian(0.0, cfg.level_noise), 0.0, cfg.tank2.capacity);
        double n_flow1 = rng.gaussian(0.0, cfg.flow_noise);
        double n_flow2 = rng.gaussian(0.0, cfg.flow_noise);

        auto spoof = [&](int channel, double value) -> double {
            if (const Attack* a = attack_at(t, AttackKind::sensor_spoof_fixed, channel))
                return a->value;
            if (const Attack* a = attack_at(t, AttackKind::sensor_spoof_offset, channel))
                return value + a->value;
            return value;
        };
        // level spoofs reach the PLC and the record; flow sensors are not
        // PLC inputs, so their spoofs affect the record only (applied below)
        s_level1 = spoof(ch.t1_level, s_level1);
        if (cfg.tanks == 2) s_level2 = spoof(ch.t2_level, s_level2);

        // PLC hysteresis on the (possibly spoofed) sensors
        if (s_level1 < cfg.tank1.low)
            v1 = 1;
        else if (s_level1 > cfg.tank1.high)
            v1 = 0;
        int prev_v2 = v2;
        if (cfg.tanks == 2) {
            if (s_level2 < cfg.tank2.low)
                v2 = 1;
            else if (s_level2 > cfg.tank2.high)
                v2 = 0;
        }
        double rate_k = 1.0;
        if (const Attack* a = attack_at(t, AttackKind::rate_scale, -1)) rate_k = a->value;

        // consumer demand square wave; its clock runs at the process rate
        int demand = 1;
        if (cfg.demand_period > 0) {
            double half = static_cast<double>(cfg.demand_period) / 2.0;
            demand = (static_cast<long long>(demand_phase / half) % 2 == 0) ? 1 : 0;
            demand_phase += rate_k;
        }
        // tank1's pump follows downstream demand one scan behind
        p1 = cfg.tanks == 2 ? prev_v2 : demand;
        int p2 = demand;

        auto override_actuator = [&](int channel, int value) -> int {
            if (const Attack* a = attack_at(t, AttackKind::actuator_override, channel))
                return a->value != 0.0 ? 1 : 0;
            return value;
        };
        v1 = override_actuator(ch.t1_valve, v1);
        p1 = override_actuator(ch.t1_pump, p1);
        if (cfg.tanks == 2) {
            v2 = override_actuator(ch.t2_valve, v2);
            p2 = override_actuator(ch.t2_pump, p2);
        }

        // flows, limited by available water
        double inflow1 = cfg.inflow_rate * rate_k * v1;
        double transfer = cfg.tanks == 2 ? cfg.transfer_rate * rate_k * (p1 & v2)
                                         : cfg.transfer_rate * rate_k * p1;
        transfer = std::min(transfer, level1 / cfg.dt);
        double outflow2 = cfg.tanks == 2 ? std::min(cfg.demand_rate * rate_k * p2, level2 / cfg.dt)
                                         : 0.0;

        // record the row: what the historian sees
        ds.features.at(t, ch.t1_level) = s_level1;
        ds.features.at(t, ch.t1_flow) = spoof(ch.t1_flow, inflow1 + n_flow1);
        ds.features.at(t, ch.t1_valve) = v1;
        ds.features.at(t, ch.t1_pump) = p1;
        if (cfg.tanks == 2) {
            ds.features.at(t, ch.t2_level) = s_level2;
            ds.features.at(t, ch.t2_flow) = spoof(ch.t2_flow, transfer + n_flow2);
            ds.features.at(t, ch.t2_valve) = v2;
            ds.features.at(t, ch.t2_pump) = p2;
        }

        // integrate
        level1 += (inflow1 - transfer) * cfg.dt;
        if (cfg.tanks == 2) level2 += (transfer - outflow2) * cfg.dt;

        auto clamp_level = [&](double& level, const TankConfig& tank) {
            if (level > tank.capacity) {
                if (!script)
                    throw ValidationError("tank overflows under normal logic; adjust the config");
                ++overflows;
                level = std::min(level, tank.capacity * 1.5);
            }
            level = std::max(level, 0.0);
        };
        clamp_level(level1, cfg.tank1);
        if (cfg.tanks == 2) clamp_level(level2, cfg.tank2);

        if (script)
            for (const Attack& a : script->attacks)
                if (t >= a.start && t < a.end) ds.labels[t] = 1;
    }

    // replay concealment rewrites the record only, after the physics ran
    if (script) {
        for (const Attack& a : script->attacks) {
            if (a.kind != AttackKind::replay_conceal) continue;
            int idx = ds.feature_index(a.feature);
            for (size_t t = a.start; t < a.end; ++t)
                ds.features.at(t, static_cast<size_t>(idx)) =
                    base->features.at(a.source_start + (t - a.start), static_cast<size_t>(idx));
        }
    }

    if (overflow_steps) *overflow_steps = overflows;
    return ds;
}

} // namespace

AttackScript default_attack_script() {
    AttackScript s;
    s.attacks.push_back({AttackKind::sensor_spoof_fixed, "T1_LEVEL", 500, 900, 350.0, 0});
    s.attacks.push_back({AttackKind::sensor_spoof_offset, "T1_FLOW_IN", 1500, 1900, 2.5, 0});
    s.attacks.push_back({AttackKind::actuator_override, "T1_VALVE", 2500, 2900, 0.0, 0});
    s.attacks.push_back({AttackKind::replay_conceal, "T1_LEVEL", 3500, 3900, 0.0, 200});
    return s;
}

TimeSeriesDataset simulate(const ProcessConfig& cfg, size_t steps, uint64_t seed) {
    return run(cfg, steps, seed, nullptr, nullptr, nullptr);
}

TimeSeriesDataset simulate(const ProcessConfig& cfg) {
    return simulate(cfg, cfg.duration_train, cfg.seed);
}

TimeSeriesDataset inject(const ProcessConfig& cfg, const TimeSeriesDataset& base,
                         const AttackScript& script, size_t* overflow_steps) {
    return run(cfg, base.records(), cfg.seed + 1, &script, &base, overflow_steps);
}

namespace {

TankConfig tank_from_json(const nlohmann::json& j) {
    TankConfig t;
    t.capacity = j.value("capacity", t.capacity);
    t.low = j.value("low", t.low);
    t.high = j.value("high", t.high);
    return t;
}

AttackKind kind_from_string(const std::string& s) {
    if (s == "sensor_spoof_fixed") return AttackKind::sensor_spoof_fixed;
    if (s == "sensor_spoof_offset") return AttackKind::sensor_spoof_offset;
    if (s == "actuator_override") return AttackKind::actuator_override;
    if (s == "replay_conceal") return AttackKind::replay_conceal;
    if (s == "rate_scale") return AttackKind::rate_scale;
    throw ValidationError("unknown attack kind: " + s);
}

const char* kind_to_string(AttackKind k) {
    switch (k) {
    case AttackKind::sensor_spoof_fixed: return "sensor_spoof_fixed";
    case AttackKind::sensor_spoof_offset: return "sensor_spoof_offset";
    case AttackKind::actuator_override: return "actuator_override";
    case AttackKind::replay_conceal: return "replay_conceal";
    case AttackKind::rate_scale: return "rate_scale";
    }
    return "?";
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    return nlohmann::json::parse(in);
}

} // namespace

ProcessConfig load_process_config(const std::string& path) {
    nlohmann::json j = read_json_file(path);
    ProcessConfig cfg;
    static const std::vector<std::string> known = {
        "dt",            "duration_train", "duration_test", "tanks",       "tank1",
        "tank2",         "inflow_rate",    "transfer_rate", "demand_rate", "demand_period",
        "level_noise",   "flow_noise",     "seed",          "attacks"};
    for (const auto& [key, _] : j.items())
        require(std::find(known.begin(), known.end(), key) != known.end(),
                "unknown key in process config: " + key);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.duration_train = j.value("duration_train", cfg.duration_train);
    cfg.duration_test = j.value("duration_test", cfg.duration_test);
    cfg.tanks = j.value("tanks", cfg.tanks);
    if (j.contains("tank1")) cfg.tank1 = tank_from_json(j["tank1"]);
    if (j.contains("tank2")) cfg.tank2 = tank_from_json(j["tank2"]);
    cfg.inflow_rate = j.value("inflow_rate", cfg.inflow_rate);
    cfg.transfer_rate = j.value("transfer_rate", cfg.transfer_rate);
    cfg.demand_rate = j.value("demand_rate", cfg.demand_rate);
    cfg.demand_period = j.value("demand_period", cfg.demand_period);
    cfg.level_noise = j.value("level_noise", cfg.level_noise);
    cfg.flow_noise = j.value("flow_noise", cfg.flow_noise);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

AttackScript load_attack_script(const std::string& path) {
    nlohmann::json j = read_json_file(path);
    AttackScript script;
    if (!j.contains("attacks")) return script;
    for (const auto& a : j["attacks"]) {
        Attack atk;
        atk.kind = kind_from_string(a.at("kind"));
        atk.feature = a.value("feature", std::string());
        atk.start = a.at("start");
        atk.end = a.at("end");
        atk.value = a.value("value", 0.0);
        atk.source_start = a.value("source_start", size_t{0});
        script.attacks.push_back(atk);
    }
    return script;
}

void save_process_config(const ProcessConfig& cfg, const AttackScript& script,
                         const std::string& path) {
    nlohmann::json j;
    j["dt"] = cfg.dt;
    j["duration_train"] = cfg.duration_train;
    j["duration_test"] = cfg.duration_test;
    j["tanks"] = cfg.tanks;
    j["tank1"] = {{"capacity", cfg.tank1.capacity}, {"low", cfg.tank1.low}, {"high", cfg.tank1.high}};
    j["tank2"] = {{"capacity", cfg.tank2.capacity}, {"low", cfg.tank2.low}, {"high", cfg.tank2.high}};
    j["inflow_rate"] = cfg.inflow_rate;
    j["transfer_rate"] = cfg.transfer_rate;
    j["demand_rate"] = cfg.demand_rate;
    j["demand_period"] = cfg.demand_period;
    j["level_noise"] = cfg.level_noise;
    j["flow_noise"] = cfg.flow_noise;
    j["seed"] = cfg.seed;
    nlohmann::json attacks = nlohmann::json::array();
    for (const Attack& a : script.attacks)
        attacks.push_back({{"kind", kind_to_string(a.kind)},
                           {"feature", a.feature},
                           {"start", a.start},
                           {"end", a.end},
                           {"value", a.value},
                           {"source_start", a.source_start}});
    j["attacks"] = attacks;
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump(2) << '\n';
}

} // namespace icsd
