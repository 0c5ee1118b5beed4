#pragma once

#include <string>
#include <vector>

#include "icsd/dataset.hpp"

namespace icsd {

/// Two tanks in series: source ->[T1_VALVE]-> tank1 ->[T1_PUMP & T2_VALVE]->
/// tank2 ->[T2_PUMP]-> consumer. Inflow valves follow PLC hysteresis on the
/// tank's level sensor; tank1's pump follows downstream demand (tank2's
/// valve, one scan behind); tank2's pump is the consumer demand wave.
struct TankConfig {
    double capacity = 600.0;
    double low = 470.0;  // PLC open-inflow threshold
    double high = 530.0; // PLC close-inflow threshold
};

struct ProcessConfig {
    double dt = 1.0;              // step seconds
    size_t duration_train = 20000;
    size_t duration_test = 5000;
    size_t tanks = 2;             // 1 or 2
    TankConfig tank1;
    TankConfig tank2{500.0, 370.0, 430.0};
    double inflow_rate = 8.0;     // source -> tank1, units/s
    double transfer_rate = 6.0;   // tank1 -> tank2
    double demand_rate = 4.5;     // tank2 -> consumer
    size_t demand_period = 0;     // consumer duty cycle in steps; 0 = always on
    double level_noise = 0.2;     // sensor sigma, level units
    double flow_noise = 0.05;     // sensor sigma, flow units
    uint64_t seed = 7;
};

enum class AttackKind {
    sensor_spoof_fixed,  // sensor channel pinned to `value`; PLC sees it too
    sensor_spoof_offset, // sensor channel shifted by `value`
    actuator_override,   // actuator forced to `value` (0/1)
    replay_conceal,      // recorded channel replaced by base[source_start ...)
    rate_scale           // all flow rates multiplied by `value` (process speed change)
};

struct Attack {
    AttackKind kind = AttackKind::sensor_spoof_fixed;
    std::string feature;    // target channel (unused for rate_scale)
    size_t start = 0;       // inclusive step
    size_t end = 0;         // exclusive step
    double value = 0.0;
    size_t source_start = 0; // replay_conceal: where the normal slice begins
};

struct AttackScript {
    std::vector<Attack> attacks;
};

/// The stock test scenario: a fixed low-level spoof that overflows tank 1, a
/// flow-meter offset contradicting the valve, a forced-closed inflow valve
/// that starves both tanks, and a replayed level channel.
AttackScript default_attack_script();

/// Euler-integrated normal operation for `steps` steps; labels all false.
/// Throws when the configured logic overflows a tank (mis-specified config).
TimeSeriesDataset simulate(const ProcessConfig& cfg, size_t steps, uint64_t seed);

/// Convenience: the train-period run with the config's own seed/duration.
TimeSeriesDataset simulate(const ProcessConfig& cfg);

/// Re-simulates the test period with the script applied: spoofed sensors are
/// what both the PLC logic and the record see, so the physics respond to the
/// attack; replayed channels affect the record only. `base` supplies the
/// replay source slices (a normal run of the same length). Labels cover
/// [start, end) of each attack. Levels are clamped to [0, 1.5 * capacity];
/// overflow_steps (optional) counts clamped steps.
TimeSeriesDataset inject(const ProcessConfig& cfg, const TimeSeriesDataset& base,
                         const AttackScript& script, size_t* overflow_steps = nullptr);

ProcessConfig load_process_config(const std::string& path);
AttackScript load_attack_script(const std::string& path);
void save_process_config(const ProcessConfig& cfg, const AttackScript& script,
                         const std::string& path);

} // namespace icsd
