#include "hevems/powertrain.hpp"

#include "hevems/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hevems::powertrain {

namespace {

void require(bool ok, const std::string &message) {
    if (!ok) {
        throw ValidationError(message);
    }
}

void require_positive(double value, const char *field) {
    require(std::isfinite(value) && value > 0.0, std::string(field) + " must be > 0");
}

void require_increasing(const std::vector<double> &v, const char *field) {
    require(!v.empty(), std::string(field) + " must not be empty");
    for (std::size_t i = 1; i < v.size(); ++i) {
        require(v[i] > v[i - 1], std::string(field) + " must be strictly increasing");
    }
}

/// Index i with bp[i] <= x <= bp[i+1] and the fractional position; x must be inside.
std::pair<std::size_t, double> locate(const std::vector<double> &bp, double x) {
    if (bp.size() == 1) {
        return {0, 0.0};
    }
    auto it = std::upper_bound(bp.begin(), bp.end(), x);
    auto i = static_cast<std::size_t>(std::distance(bp.begin(), it));
    i = std::clamp<std::size_t>(i, 1, bp.size() - 1) - 1;
    return {i, (x - bp[i]) / (bp[i + 1] - bp[i])};
}

double table_lookup(const std::vector<double> &xs, const std::vector<double> &ys, double x) {
    if (x <= xs.front()) {
        return ys.front();
    }
    if (x >= xs.back()) {
        return ys.back();
    }
    const auto [i, w] = locate(xs, x);
    return ys[i] + w * (ys[i + 1] - ys[i]);
}

} // namespace

void VehicleParams::validate() const {
    require_positive(mass, "vehicle.mass");
    require_positive(frontal_area, "vehicle.frontal_area");
    require_positive(drag_coeff, "vehicle.drag_coeff");
    require_positive(rolling_coeff, "vehicle.rolling_coeff");
    require_positive(tire_radius, "vehicle.tire_radius");
    require_positive(air_density, "vehicle.air_density");
    require_positive(gravity, "vehicle.gravity");
    require(eta_transmission > 0.0 && eta_transmission <= 1.0,
            "vehicle.eta_transmission must be in (0, 1]");
    require(eta_motor > 0.0 && eta_motor <= 1.0, "vehicle.eta_motor must be in (0, 1]");
    require(rotating_mass_factor >= 1.0, "vehicle.rotating_mass_factor must be >= 1");
}

// ---------------------------------------------------------------------------
// Fuel map
// ---------------------------------------------------------------------------

FuelMap::FuelMap(std::vector<double> torque_nm, std::vector<double> speed_rpm,
                 std::vector<double> rates)
    : torque_(std::move(torque_nm)), speed_(std::move(speed_rpm)), rates_(std::move(rates)) {
    validate();
}

double FuelMap::synthetic_efficiency(double torque_nm, double speed_rpm) {
    const double dt = (torque_nm - 600.0) / 600.0;
    const double dn = (speed_rpm - 1500.0) / 900.0;
    return std::max(0.10, 0.40 - 0.30 * dt * dt - 0.07 * dn * dn);
}

FuelMap FuelMap::synthetic() {
    std::vector<double> torque;
    std::vector<double> speed;
    for (int t = 0; t <= 900; t += 50) {
        torque.push_back(t);
    }
    for (int n = 600; n <= 2600; n += 100) {
        speed.push_back(n);
    }
    std::vector<double> rates;
    rates.reserve(torque.size() * speed.size());
    for (double t : torque) {
        for (double n : speed) {
            const double power = t * n * kRpmToRadPerSec;
            rates.push_back(power / (synthetic_efficiency(t, n) * kLowerHeatingValue));
        }
    }
    return FuelMap(std::move(torque), std::move(speed), std::move(rates));
}

void FuelMap::validate() const {
    require_increasing(torque_, "engine.fuel_map torque breakpoints");
    require_increasing(speed_, "engine.fuel_map speed breakpoints");
    require(rates_.size() == torque_.size() * speed_.size(),
            "engine.fuel_map: rate table must be torque x speed");
    for (double r : rates_) {
        require(std::isfinite(r) && r >= 0.0, "engine.fuel_map: rates must be finite and >= 0");
    }
}

double FuelMap::rate(double torque_nm, double speed_rpm) const {
    if (torque_nm < torque_.front() || torque_nm > torque_.back() || speed_rpm < speed_.front() ||
        speed_rpm > speed_.back() || !std::isfinite(torque_nm) || !std::isfinite(speed_rpm)) {
        throw ModelError("fuel map query outside grid: " + std::to_string(torque_nm) + " Nm, " +
                         std::to_string(speed_rpm) + " rpm");
    }
    const auto [i, wt] = locate(torque_, torque_nm);
    const auto [j, wn] = locate(speed_, speed_rpm);
    const std::size_t cols = speed_.size();
    auto at = [&](std::size_t ti, std::size_t sj) {
        return rates_[std::min(ti, torque_.size() - 1) * cols + std::min(sj, cols - 1)];
    };
    const double low = at(i, j) + wn * (at(i, j + 1) - at(i, j));
    const double high = at(i + 1, j) + wn * (at(i + 1, j + 1) - at(i + 1, j));
    return low + wt * (high - low);
}

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

double EngineModel::torque_limit(double w) const {
    if (w <= 0.0) {
        return max_torque;
    }
    return std::min(max_torque, rated_power / w);
}

void EngineModel::validate() const {
    require_positive(max_torque, "engine.max_torque");
    require_positive(rated_power, "engine.rated_power");
    fuel_map.validate();
}

double BatteryModel::open_circuit_voltage(double soc) const {
    return table_soc.empty() ? v_oc : table_lookup(table_soc, table_v_oc, soc);
}

double BatteryModel::resistance(double soc) const {
    return table_soc.empty() ? r_in : table_lookup(table_soc, table_r_in, soc);
}

double BatteryModel::discharge_limit(double soc) const {
    const double v = open_circuit_voltage(soc);
    return std::min(max_discharge_power, v * v / (4.0 * resistance(soc)));
}

double BatteryModel::min_discharge_limit() const {
    if (table_soc.empty()) {
        return discharge_limit(0.0);
    }
    double lowest = max_discharge_power;
    for (double s : table_soc) {
        lowest = std::min(lowest, discharge_limit(s));
    }
    return lowest;
}

void BatteryModel::validate() const {
    require_positive(capacity, "battery.capacity");
    require_positive(v_oc, "battery.v_oc");
    require_positive(r_in, "battery.r_in");
    require_positive(max_discharge_power, "battery.max_discharge_power");
    require_positive(max_charge_power, "battery.max_charge_power");
    if (!table_soc.empty()) {
        require_increasing(table_soc, "battery.table_soc");
        require(table_v_oc.size() == table_soc.size() && table_r_in.size() == table_soc.size(),
                "battery: SOC tables must have equal length");
        for (std::size_t i = 0; i < table_soc.size(); ++i) {
            require(table_v_oc[i] > 0.0, "battery.table_v_oc must be > 0");
            require(table_r_in[i] > 0.0, "battery.table_r_in must be > 0");
        }
    }
}

double MotorModel::power_limit(double w) const {
    if (w <= 0.0 || w > max_speed_rpm * kRpmToRadPerSec) {
        return 0.0;
    }
    return std::min(max_power, max_torque * w);
}

void MotorModel::validate() const {
    require_positive(max_speed_rpm, "motor.max_speed_rpm");
    require_positive(max_power, "motor.max_power");
    require_positive(max_torque, "motor.max_torque");
}

std::size_t Transmission::gear(double v) const {
    return static_cast<std::size_t>(
        std::upper_bound(shift_speeds.begin(), shift_speeds.end(), v) - shift_speeds.begin());
}

void Transmission::validate() const {
    require(!gear_ratios.empty(), "transmission.gear_ratios must not be empty");
    for (std::size_t i = 0; i < gear_ratios.size(); ++i) {
        require(gear_ratios[i] > 0.0, "transmission.gear_ratios must be > 0");
        require(i == 0 || gear_ratios[i] < gear_ratios[i - 1],
                "transmission.gear_ratios must be strictly decreasing");
    }
    require(shift_speeds.size() + 1 == gear_ratios.size(),
            "transmission.shift_speeds must have one entry fewer than gear_ratios");
    for (std::size_t i = 1; i < shift_speeds.size(); ++i) {
        require(shift_speeds[i] > shift_speeds[i - 1],
                "transmission.shift_speeds must be strictly increasing");
    }
    require_positive(final_drive, "transmission.final_drive");
    require_positive(idle_rpm, "transmission.idle_rpm");
}

void Powertrain::validate() const {
    vehicle.validate();
    engine.validate();
    battery.validate();
    motor.validate();
    transmission.validate();
}

// ---------------------------------------------------------------------------
// Physics
// ---------------------------------------------------------------------------

double power_demand(const VehicleParams &p, double v, double a) {
    const double rolling = p.rolling_coeff * p.mass * p.gravity * v;
    const double aero = 0.5 * p.air_density * p.drag_coeff * p.frontal_area * v * v * v;
    const double inertia = p.rotating_mass_factor * p.mass * a * v;
    const double wheel = rolling + aero + inertia;
    // The driveline loses power in both directions.
    return wheel >= 0.0 ? wheel / p.eta_transmission : wheel * p.eta_transmission;
}

double engine_speed(const Transmission &trans, const VehicleParams &params, double v) {
    const double ratio = trans.gear_ratios[trans.gear(v)] * trans.final_drive;
    const double rpm = v / params.tire_radius * ratio / kRpmToRadPerSec;
    return std::max(rpm, trans.idle_rpm);
}

double fuel_rate(const EngineModel &engine, double torque_nm, double speed_rpm) {
    if (torque_nm <= 0.0) {
        return 0.0;
    }
    const double w = speed_rpm * kRpmToRadPerSec;
    return std::max(0.0, engine.fuel_map.rate(std::min(torque_nm, engine.torque_limit(w)), speed_rpm));
}

double soc_derivative(const BatteryModel &batt, double p_bat, double soc) {
    if (p_bat == 0.0) {
        return 0.0;
    }
    const double v = batt.open_circuit_voltage(soc);
    const double r = batt.resistance(soc);
    const double disc = v * v - 4.0 * r * p_bat;
    if (disc < 0.0) {
        throw ModelError("battery power " + std::to_string(p_bat) +
                         " W exceeds the circuit limit V_oc^2/(4 r_in)");
    }
    // -(V - sqrt(disc)) / (2 r Q), rationalized to avoid cancellation at small power.
    return -2.0 * p_bat / ((v + std::sqrt(disc)) * batt.capacity);
}

double advance_soc(const BatteryModel &batt, double soc, double p_bat, double dt) {
    return soc + dt * soc_derivative(batt, p_bat, soc);
}

StepDemand evaluate_demand(const Powertrain &pt, double v, double a) {
    StepDemand d;
    d.v = v;
    d.a = a;
    d.engine_rpm = engine_speed(pt.transmission, pt.vehicle, v);
    d.w = d.engine_rpm * kRpmToRadPerSec;
    d.p_request = power_demand(pt.vehicle, v, a);
    const double motor_peak = std::min(pt.motor.power_limit(d.w),
                                       pt.battery.min_discharge_limit() * pt.vehicle.eta_motor);
    const double peak = pt.engine.torque_limit(d.w) * d.w + motor_peak;
    d.p_demand = std::min(d.p_request, peak);
    d.shortfall = d.p_request - d.p_demand;
    d.shaft_torque = d.p_demand / d.w;
    return d;
}

std::vector<StepDemand> demand_profile(const DriveCycle &cycle, const Powertrain &pt) {
    validate(cycle);
    std::vector<StepDemand> out;
    out.reserve(cycle.size() - 1);
    for (std::size_t k = 0; k + 1 < cycle.size(); ++k) {
        const double v0 = cycle.speeds[k];
        const double v1 = cycle.speeds[k + 1];
        out.push_back(evaluate_demand(pt, 0.5 * (v0 + v1), (v1 - v0) / cycle.dt));
    }
    return out;
}

SplitResult split_step(const Powertrain &pt, const StepDemand &d, double torque_cmd, double soc) {
    SplitResult s;
    // Start-stop: the engine is shut down while the vehicle stands still.
    const double cmd = d.v > 0.0 ? torque_cmd : 0.0;
    s.torque = std::clamp(cmd, 0.0, pt.engine.torque_limit(d.w));
    s.fuel_rate = fuel_rate(pt.engine, s.torque, d.engine_rpm);
    s.p_engine = s.torque * d.w;

    const double eta = pt.vehicle.eta_motor;
    const double required = d.p_demand - s.p_engine;
    const double motor_limit = pt.motor.power_limit(d.w);
    if (required >= 0.0) {
        const double cap = std::min(motor_limit, pt.battery.discharge_limit(soc) * eta);
        s.feasible = required <= cap * (1.0 + 1e-12);
        s.p_motor = std::min(required, cap);
        s.p_battery = s.p_motor / eta;
    } else {
        const double cap = std::min(motor_limit, pt.battery.max_charge_power / eta);
        s.p_motor = std::max(required, -cap);
        s.p_friction = s.p_motor - required;
        // Brakes may only dissipate braking power, not surplus engine output.
        s.feasible = s.p_friction <= std::max(0.0, -d.p_demand) * (1.0 + 1e-12);
        s.p_battery = s.p_motor * eta;
    }
    return s;
}

SplitResult split_step(const Powertrain &pt, double v, double a, double torque_cmd, double soc) {
    return split_step(pt, evaluate_demand(pt, v, a), torque_cmd, soc);
}

} // namespace hevems::powertrain
