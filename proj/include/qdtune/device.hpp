#pragma once

// Constant-interaction proxy for a six-gate double-quantum-dot device.
//
// The channel current factorizes into per-gate logistic transmissions and a
// Coulomb resonance factor computed from electrostatic occupancy minimization:
//
//   I = A_sat * prod_g T_g(u_g) * R_eff(V_LP, V_RP, kappa) + noise
//
// where u_g is the gate's effective voltage including cross-capacitive shifts
// from the top barrier and neighbouring gates. R_eff blends a honeycomb
// pattern (two dots, charge-degeneracy boundaries of a two-site energy
// functional) with diagonal stripes (one merged dot) according to the
// interdot coupling kappa(V_CB), and is weighted by a confinement factor so
// that an open device reads exactly A_sat.
//
// Note on monotonicity: decreasing TB, LB or RB can only reduce the current
// (their couplings enter envelopes with a single sign). The central barrier
// additionally morphs the resonance pattern via kappa, so pointwise
// monotonicity holds for it only where the pattern amplitude vanishes
// (e.g. both dots empty); this mirrors real devices, where closing the
// middle gate can move a degeneracy line onto the measurement point.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdtune/rng.hpp"

namespace qd {

enum class Gate : int { TB = 0, LB = 1, CB = 2, RB = 3, LP = 4, RP = 5 };
inline constexpr int kNumGates = 6;
inline constexpr std::array<Gate, 6> kAllGates = {Gate::TB, Gate::LB, Gate::CB,
                                                  Gate::RB, Gate::LP, Gate::RP};
inline constexpr std::array<Gate, 3> kLowerBarriers = {Gate::LB, Gate::CB, Gate::RB};
inline constexpr std::array<Gate, 2> kPlungers = {Gate::LP, Gate::RP};

const std::string& gate_name(Gate g);
Gate gate_from_name(const std::string& name);

using Voltages = std::array<double, kNumGates>;

struct VoltageInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    double span() const { return hi - lo; }
};

struct DeviceLayout {
    std::array<VoltageInterval, kNumGates> safety;  // volts
    double noise_floor = 0.02;                      // normalized current units

    void validate() const;
};

struct FaultProfile {
    bool dead_channel = false;
    std::array<bool, kNumGates> unresponsive = {false, false, false, false, false, false};

    bool any() const;
};

enum class Regime { NoDot = 0, SingleDot = 1, DoubleDot = 2 };
const std::string& regime_name(Regime r);

// Hidden physics of one device. Immutable after construction; safe to share.
struct DevicePhysics {
    DeviceLayout layout;

    // Per-gate transmission: T_g = 0.5*(1 + tanh((u_g - center[g]) / width[g])).
    // u_g = V_g + tb_coupling[g]*V_TB + sum_h cross[g][h]*(V_h - safety[h].hi).
    std::array<double, kNumGates> center{};       // volts (TB entry unused)
    std::array<double, kNumGates> width{};        // volts
    std::array<double, kNumGates> tb_coupling{};  // dimensionless
    std::array<std::array<double, kNumGates>, kNumGates> cross{};  // lever arms

    // Two-site electrostatics: U(N1,N2) = E1*N1^2/2 + E2*N2^2/2 + Em*N1*N2
    //                                     - N1*f1 - N2*f2, f_i linear in plungers.
    double charging1 = 0.025;   // E_C1
    double charging2 = 0.025;   // E_C2
    double charging_m = 0.006;  // E_Cm, < min(E_C1, E_C2)
    double lever1_lp = 0.65, lever1_rp = 0.17;  // dot 1 plunger lever arms
    double lever2_lp = 0.17, lever2_rp = 0.65;  // dot 2
    double plunger1_origin = -3.2;              // volts where f1 = 0
    double plunger2_origin = -3.2;

    // Merged single dot: U_s(N) = Es*N^2/2 - N*fs.
    double charging_s = 0.016;
    double lever_s_lp = 0.42, lever_s_rp = 0.42;
    double plunger_s_origin = -3.3;

    // Interdot coupling map kappa(V_CB) = 0.5*(1 + tanh((V_CB - kappa_center)/kappa_width)).
    double kappa_center = -2.7;
    double kappa_width = 0.2;

    double thermal_broadening = 0.01;  // plunger-voltage units
    double saturation = 1.0;           // A_sat, normalized
    double noise_sigma = 0.005;
    bool drift_enabled = false;        // slow 1/f-like drift, off by default
    double drift_amplitude = 0.0;
    double pinchoff_offset = 0.0;      // static shift of lower-gate centers (offset charges)

    FaultProfile faults;
    std::uint64_t seed = 0;

    double transmission(Gate g, const Voltages& v) const;
    double kappa(double v_cb) const;
    // Ground-state occupancy of the two-site functional at these plungers.
    std::pair<int, int> double_dot_occupancy(double v_lp, double v_rp) const;
    int single_dot_occupancy(double v_lp, double v_rp) const;
};

// Regime oracle thresholds. Documented simulator constants.
inline constexpr double kOracleBarrierTmin = 0.003;
inline constexpr double kOracleBarrierTmax = 0.55;
inline constexpr double kKappaSplit = 0.45;   // kappa below -> interdot coupling low enough for two dots
inline constexpr double kKappaMerge = 0.55;   // kappa at or above -> dots merged
inline constexpr int kOracleOccupancyMin = 1;
inline constexpr int kOracleOccupancyMax = 60;

// Pure noiseless current. Throws std::out_of_range on a safety violation.
double noiseless_current(const DevicePhysics& p, const Voltages& v);

// Ground-truth regime, bypassing any classifier.
Regime oracle_regime(const DevicePhysics& p, const Voltages& v);

// Deterministic random device. Parameters are drawn so that an un-faulted
// device is tunable: every barrier pinches the channel inside its safety
// range once the top barrier is at its lower limit.
DevicePhysics new_random_device(std::uint64_t seed,
                                const std::optional<FaultProfile>& faults = std::nullopt);

struct Trace {
    Gate gate = Gate::TB;
    std::vector<double> setpoints;  // volts
    std::vector<double> currents;   // device units unless normalized downstream
    double v_min() const { return setpoints.front() < setpoints.back() ? setpoints.front() : setpoints.back(); }
    double v_max() const { return setpoints.front() < setpoints.back() ? setpoints.back() : setpoints.front(); }
};

struct CurrentMap {
    Gate x_gate = Gate::LP;
    Gate y_gate = Gate::RP;
    std::vector<double> xs;      // ascending
    std::vector<double> ys;      // ascending
    std::vector<double> values;  // row-major, values[iy * xs.size() + ix]
    double a_max = 1.0;          // normalization reference used downstream

    double at(std::size_t iy, std::size_t ix) const { return values[iy * xs.size() + ix]; }
    std::size_t nx() const { return xs.size(); }
    std::size_t ny() const { return ys.size(); }
};

class SafetyViolation : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// One measurement session on one device. Single-threaded by contract.
// Voltages are validated against the active safety ranges on every set;
// a violation throws and is counted, never silently clamped.
class DeviceSession {
public:
    explicit DeviceSession(DevicePhysics physics, bool noiseless = false);

    const DevicePhysics& physics() const { return physics_; }
    const std::array<VoltageInterval, kNumGates>& safety() const { return safety_; }
    const Voltages& voltages() const { return state_; }
    double voltage(Gate g) const { return state_[static_cast<int>(g)]; }
    double noise_floor() const { return physics_.layout.noise_floor; }

    void set_voltage(Gate g, double v);
    void set_all(const Voltages& v);
    void set_all_to_safe_max();

    // Shift every active safety range by delta volts (positive = up).
    void shift_safety_ranges(double delta);

    // Current at the present voltages. Advances the noise stream unless the
    // session is noiseless.
    double measure();

    // Sweeps restore the pre-sweep voltages afterwards.
    Trace sweep_1d(Gate g, double v_from, double v_to, int n_points);
    CurrentMap sweep_2d(Gate x, Gate y, VoltageInterval range_x, VoltageInterval range_y,
                        int n_x, int n_y);

    Regime oracle() const { return oracle_regime(physics_, state_); }
    Regime oracle_at(const Voltages& v) const { return oracle_regime(physics_, v); }

    double a_max() const { return a_max_; }
    void record_a_max(double a) { a_max_ = a; }

    long n_1d() const { return n_1d_; }
    long n_2d() const { return n_2d_; }
    long safety_violations() const { return safety_violations_; }
    bool noiseless() const { return noiseless_; }

private:
    double current_with_noise();
    void check(Gate g, double v);

    DevicePhysics physics_;
    std::array<VoltageInterval, kNumGates> safety_;
    Voltages state_{};
    double a_max_ = 1.0;
    Rng noise_;
    double drift_state_ = 0.0;
    bool noiseless_;
    long n_1d_ = 0;
    long n_2d_ = 0;
    long safety_violations_ = 0;
    long measurements_ = 0;
};

// Fixture (de)serialization: layout, safety ranges, physics, faults, seed.
std::string physics_to_json(const DevicePhysics& p);
DevicePhysics physics_from_json(const std::string& text);

}  // namespace qd
