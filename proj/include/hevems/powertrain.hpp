// Quasi-static parallel hybrid powertrain: road load, engine fuel map,
// battery circuit, motor limits, and the engine/battery split for a commanded
// engine torque. Engine and motor share the input shaft of the gearbox.
#pragma once

#include "hevems/cycle.hpp"

#include <vector>

namespace hevems::powertrain {

inline constexpr double kRpmToRadPerSec = 3.14159265358979323846 / 30.0;

/// Longitudinal vehicle parameters. Defaults are the city-bus values of the reference vehicle.
struct VehicleParams {
    double mass = 16000.0;            ///< kg
    double frontal_area = 1.8;        ///< m^2
    double drag_coeff = 0.55;
    double eta_transmission = 0.9;
    double eta_motor = 0.95;
    double rolling_coeff = 0.021;
    double tire_radius = 0.508;       ///< m
    double air_density = 1.293;       ///< kg/m^3
    double gravity = 9.81;            ///< m/s^2
    double rotating_mass_factor = 1.0;

    void validate() const;
};

/**
 * @brief Fuel-rate lookup table over (torque, speed).
 *
 * Rates are in g/s, indexed [torque][speed] on strictly increasing
 * breakpoints (Nm, rpm). Queries use bilinear interpolation.
 */
class FuelMap {
public:
    FuelMap() = default;
    FuelMap(std::vector<double> torque_nm, std::vector<double> speed_rpm, std::vector<double> rates);

    /// Smooth synthetic bus-engine map; see synthetic_efficiency().
    static FuelMap synthetic();

    /// Brake efficiency surface of the synthetic map: a concave paraboloid
    /// peaking at 0.40 at (600 Nm, 1500 rpm), floored at 0.10.
    static double synthetic_efficiency(double torque_nm, double speed_rpm);

    /// Fuel lower heating value used by the synthetic map, J/g (diesel).
    static constexpr double kLowerHeatingValue = 42500.0;

    double rate(double torque_nm, double speed_rpm) const;

    const std::vector<double> &torque_breakpoints() const { return torque_; }
    const std::vector<double> &speed_breakpoints() const { return speed_; }
    const std::vector<double> &rates() const { return rates_; }

    double min_speed() const { return speed_.front(); }
    double max_speed() const { return speed_.back(); }

    void validate() const;

private:
    std::vector<double> torque_;
    std::vector<double> speed_;
    std::vector<double> rates_;
};

struct EngineModel {
    double max_torque = 900.0;     ///< Nm
    double rated_power = 155000.0; ///< W
    FuelMap fuel_map = FuelMap::synthetic();

    /// Upper torque bound at shaft speed `w` (rad/s): min(max_torque, rated_power / w).
    double torque_limit(double w) const;
    void validate() const;
};

/**
 * @brief First-order internal-resistance battery.
 *
 * Open-circuit voltage and resistance are constants unless the optional
 * per-SOC tables are filled, in which case they are linearly interpolated.
 */
struct BatteryModel {
    double capacity = 216000.0;       ///< C (60 Ah)
    double v_oc = 312.5;              ///< V
    double r_in = 0.1;                ///< Ohm
    double max_discharge_power = 200000.0; ///< W, terminal
    double max_charge_power = 200000.0;    ///< W, terminal, magnitude

    std::vector<double> table_soc;
    std::vector<double> table_v_oc;
    std::vector<double> table_r_in;

    double open_circuit_voltage(double soc) const;
    double resistance(double soc) const;
    /// Discharge limit at `soc`, never above the circuit's maximum V_oc^2 / (4 r_in).
    double discharge_limit(double soc) const;
    /// Smallest discharge limit over the SOC tables (or the constant one).
    double min_discharge_limit() const;
    void validate() const;
};

struct MotorModel {
    double max_speed_rpm = 2400.0;
    double max_power = 90000.0; ///< W
    double max_torque = 600.0;  ///< Nm

    /// Mechanical power bound at shaft speed `w` (rad/s); zero above max speed.
    double power_limit(double w) const;
    void validate() const;
};

struct Transmission {
    std::vector<double> gear_ratios{6.0, 3.5, 2.0, 1.2, 0.9};
    double final_drive = 4.1;
    std::vector<double> shift_speeds{5.0, 8.5, 15.0, 24.0}; ///< m/s, upshift at or above
    double idle_rpm = 600.0;

    /// Gear index for vehicle speed `v`: the number of shift thresholds <= v.
    std::size_t gear(double v) const;
    void validate() const;
};

struct Powertrain {
    VehicleParams vehicle;
    EngineModel engine;
    BatteryModel battery;
    MotorModel motor;
    Transmission transmission;

    void validate() const;
};

/// Power at the gearbox input for speed `v` and acceleration `a`, W; negative when braking.
double power_demand(const VehicleParams &params, double v, double a);

/// Engine (and motor) shaft speed in rpm, clamped below by idle.
double engine_speed(const Transmission &trans, const VehicleParams &params, double v);

/// Engine fuel rate in g/s; zero torque burns no fuel.
double fuel_rate(const EngineModel &engine, double torque_nm, double speed_rpm);

/// dSOC/dt for battery terminal power `p_bat` (W, positive = discharge).
double soc_derivative(const BatteryModel &batt, double p_bat, double soc);

/// Demand seen by the powertrain over one step of a cycle.
struct StepDemand {
    double v = 0.0;              ///< mean speed over the step, m/s
    double a = 0.0;              ///< m/s^2
    double p_request = 0.0;      ///< road-load demand before saturation, W
    double p_demand = 0.0;       ///< demand after saturation at the powertrain's peak, W
    double shortfall = 0.0;      ///< p_request - p_demand, W
    double engine_rpm = 0.0;
    double w = 0.0;              ///< shaft speed, rad/s
    double shaft_torque = 0.0;   ///< p_demand / w, Nm
};

StepDemand evaluate_demand(const Powertrain &pt, double v, double a);

/**
 * Per-step demand for a whole cycle. Step k spans samples k and k+1: mean
 * speed, forward-difference acceleration. Returns size() - 1 entries.
 */
std::vector<StepDemand> demand_profile(const DriveCycle &cycle, const Powertrain &pt);

struct SplitResult {
    double torque = 0.0;     ///< engine torque after clamping, Nm
    double fuel_rate = 0.0;  ///< g/s
    double p_engine = 0.0;   ///< W
    double p_motor = 0.0;    ///< mechanical, W (negative = generating)
    double p_friction = 0.0; ///< dissipated in service brakes, W
    double p_battery = 0.0;  ///< terminal, W (negative = charging)
    bool feasible = true;
};

/**
 * Split the step demand between engine and battery for commanded engine
 * torque `torque_cmd`. The engine torque is clamped to its envelope; the motor
 * covers the remainder. Motor or battery limit violations are reported
 * through `feasible` with flows held at the limits. Braking energy beyond the
 * regeneration limits goes to the friction brakes. At standstill (zero mean
 * step speed) the engine is off and the command is ignored.
 */
SplitResult split_step(const Powertrain &pt, const StepDemand &demand, double torque_cmd,
                       double soc);

SplitResult split_step(const Powertrain &pt, double v, double a, double torque_cmd, double soc);

/// Explicit Euler SOC update over `dt` seconds.
double advance_soc(const BatteryModel &batt, double soc, double p_bat, double dt);

} // namespace hevems::powertrain
