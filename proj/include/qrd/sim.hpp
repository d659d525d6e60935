#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qrd/rng.hpp"

namespace qrd {

using Complex = std::complex<double>;

struct QubitConfig {
    int index = 0;
    double if_freq = 0.0;  // Hz, below Nyquist
    // Steady-state baseband centroids for levels 0, 1, 2.
    std::array<Complex, 3> level_response{};
    double ring_tau = 0.0;  // seconds; 0 means an instantaneous step response
    double t1 = 0.0;        // level-1 lifetime, seconds
    double t1_level2 = 0.0; // level-2 lifetime (2 -> 1), seconds
    double p_excite_01 = 0.0;
    double p_excite_02 = 0.0;
    double p_excite_12 = 0.0;
    double p_leak_prep = 0.0;  // computational preparation replaced by level 2
};

struct DeviceConfig {
    std::vector<QubitConfig> qubits;
    double sample_rate = 500e6;  // samples/second
    double duration = 1e-6;      // seconds; sample_rate * duration integral
    double noise_std = 0.0;      // per quadrature per raw sample
    std::vector<double> crosstalk;  // row-major n x n, unit diagonal
    std::uint64_t seed = 0;

    int num_qubits() const { return static_cast<int>(qubits.size()); }
    int num_samples() const;
    void validate() const;  // throws ConfigError
};

// One level change during readout. 2 -> 0 is always stored as 2 -> 1, 1 -> 0.
struct LevelEvent {
    double time_s = 0.0;
    int from = 0;
    int to = 0;
};

struct QubitTruth {
    int prepared = 0;  // requested level
    int initial = 0;   // level actually read out (after prepared-state leakage)
    std::vector<LevelEvent> events;

    bool has_relaxation() const;
    bool leaked() const;  // initial == 2 or any event into level 2
};

struct GroundTruth {
    std::vector<QubitTruth> qubits;
};

struct RawShot {
    std::vector<float> i_samples;
    std::vector<float> q_samples;
    GroundTruth truth;
    std::vector<int> prep_label;
};

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct TraceDataset {
    DeviceConfig device;
    std::vector<std::vector<int>> states;
    int shots_per_state = 0;
    std::vector<RawShot> shots;
    std::vector<Split> split;
};

// Per-device carrier table: carriers[q][t] = exp(+i 2 pi f_q t / fs).
class CarrierTable {
public:
    explicit CarrierTable(const DeviceConfig& device);
    const std::vector<Complex>& carrier(int qubit) const { return carriers_[qubit]; }

private:
    std::vector<std::vector<Complex>> carriers_;
};

// Draws one shot from the per-shot substream. Draw order per qubit: leakage
// uniform, relaxation dwell exponentials, excitation-kind uniform, excitation
// time uniform, post-excitation dwells; then per sample one normal for I and
// one for Q.
RawShot sample_trace(const DeviceConfig& device, const std::vector<int>& prep, PhiloxRng& stream);
RawShot sample_trace(const DeviceConfig& device, const CarrierTable& carriers,
                     const std::vector<int>& prep, PhiloxRng& stream);

// Shot j of the dataset uses PhiloxRng(device.seed, j) and prepares
// states[j / shots_per_state]; any thread count reproduces the serial output.
TraceDataset generate_dataset(const DeviceConfig& device,
                              const std::vector<std::vector<int>>& states, int shots_per_state,
                              int threads = 0);

std::vector<std::vector<int>> computational_states(int n_qubits);  // 2^n, qubit 0 fastest
std::vector<std::vector<int>> all_level_states(int n_qubits);      // 3^n

// Default five-qubit-style device: IFs 50 MHz + 30 MHz * q, T1 drawn uniformly
// from [7, 40] us per qubit, t1_level2 = t1 / 2, nearest-neighbor crosstalk.
DeviceConfig default_device(int n_qubits, std::uint64_t seed);

// Level at time t implied by an initial level and an event list.
int level_at(int initial, const std::vector<LevelEvent>& events, double t);

}  // namespace qrd
