#include "qrd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "qrd/errors.hpp"
#include "qrd/parallel.hpp"

namespace qrd {

namespace {

bool finite(double v) { return std::isfinite(v); }

bool probability(double v) { return finite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

int DeviceConfig::num_samples() const {
    const double n = sample_rate * duration;
    const long long rounded = std::llround(n);
    if (rounded < 1 || std::abs(n - static_cast<double>(rounded)) > 1e-6 * std::max(1.0, n)) {
        throw ConfigError("sample_rate * duration must be a positive integer, got " +
                          std::to_string(n));
    }
    return static_cast<int>(rounded);
}

void DeviceConfig::validate() const {
    const int n = num_qubits();
    if (n < 1) throw ConfigError("device needs at least one qubit");
    if (!finite(sample_rate) || sample_rate <= 0.0) throw ConfigError("sample_rate must be positive");
    if (!finite(duration) || duration <= 0.0) throw ConfigError("duration must be positive");
    num_samples();
    if (!finite(noise_std) || noise_std < 0.0) throw ConfigError("noise_std must be >= 0");

    std::set<double> freqs;
    for (const auto& q : qubits) {
        const std::string tag = "qubit " + std::to_string(q.index) + ": ";
        if (!finite(q.if_freq) || q.if_freq < 0.0 || q.if_freq >= sample_rate / 2.0) {
            throw ConfigError(tag + "if_freq must lie in [0, sample_rate/2)");
        }
        if (!freqs.insert(q.if_freq).second) throw ConfigError(tag + "duplicate if_freq");
        for (const auto& c : q.level_response) {
            if (!finite(c.real()) || !finite(c.imag())) throw ConfigError(tag + "non-finite centroid");
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                if (std::abs(q.level_response[a] - q.level_response[b]) <= 0.0) {
                    throw ConfigError(tag + "level_response centroids must be pairwise distinct");
                }
            }
        }
        if (!finite(q.ring_tau) || q.ring_tau < 0.0) throw ConfigError(tag + "ring_tau must be >= 0");
        if (!finite(q.t1) || q.t1 <= 0.0) throw ConfigError(tag + "t1 must be > 0");
        if (!finite(q.t1_level2) || q.t1_level2 <= 0.0) throw ConfigError(tag + "t1_level2 must be > 0");
        if (!probability(q.p_excite_01) || !probability(q.p_excite_02) ||
            !probability(q.p_excite_12) || !probability(q.p_leak_prep)) {
            throw ConfigError(tag + "probabilities must lie in [0, 1]");
        }
        if (q.p_excite_01 + q.p_excite_02 + q.p_excite_12 > 1.0) {
            throw ConfigError(tag + "excitation probabilities must sum to <= 1");
        }
    }

    if (crosstalk.size() != static_cast<std::size_t>(n) * n) {
        throw ConfigError("crosstalk must be n x n");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = crosstalk[static_cast<std::size_t>(i) * n + j];
            if (!finite(x)) throw ConfigError("non-finite crosstalk entry");
            if (i == j && x != 1.0) throw ConfigError("crosstalk diagonal must be 1.0");
            if (i != j && std::abs(x) >= 0.2) throw ConfigError("crosstalk off-diagonal |x| must be < 0.2");
        }
    }
}

bool QubitTruth::has_relaxation() const {
    for (const auto& e : events) {
        if (e.to < e.from) return true;
    }
    return false;
}

bool QubitTruth::leaked() const {
    if (initial == 2) return true;
    for (const auto& e : events) {
        if (e.to == 2) return true;
    }
    return false;
}

int level_at(int initial, const std::vector<LevelEvent>& events, double t) {
    int level = initial;
    for (const auto& e : events) {
        if (e.time_s <= t) level = e.to;
    }
    return level;
}

CarrierTable::CarrierTable(const DeviceConfig& device) {
    const int n_samples = device.num_samples();
    carriers_.resize(device.qubits.size());
    for (std::size_t q = 0; q < device.qubits.size(); ++q) {
        carriers_[q].resize(n_samples);
        const double w = 2.0 * std::numbers::pi * device.qubits[q].if_freq / device.sample_rate;
        for (int t = 0; t < n_samples; ++t) {
            carriers_[q][t] = std::polar(1.0, w * static_cast<double>(t));
        }
    }
}

namespace {

// Relaxation cascade from `level` starting at `t0`; appends events before the
// end of the readout window.
void relax_cascade(const QubitConfig& q, int level, double t0, double duration, PhiloxRng& rng,
                   std::vector<LevelEvent>& events) {
    double t = t0;
    while (level > 0) {
        const double dwell = rng.exponential(level == 2 ? q.t1_level2 : q.t1);
        t += dwell;
        if (t >= duration) return;
        events.push_back({t, level, level - 1});
        --level;
    }
}

QubitTruth draw_qubit_truth(const QubitConfig& q, int prep, double duration, PhiloxRng& rng) {
    QubitTruth truth;
    truth.prepared = prep;
    truth.initial = prep;
    if (prep != 2 && rng.uniform() < q.p_leak_prep) truth.initial = 2;

    relax_cascade(q, truth.initial, 0.0, duration, rng, truth.events);

    // At most one excitation attempt per shot; it lands only if the trace is
    // actually at the source level at the drawn time.
    const double r = rng.uniform();
    int src = -1, dst = -1;
    if (r < q.p_excite_01) {
        src = 0; dst = 1;
    } else if (r < q.p_excite_01 + q.p_excite_02) {
        src = 0; dst = 2;
    } else if (r < q.p_excite_01 + q.p_excite_02 + q.p_excite_12) {
        src = 1; dst = 2;
    }
    if (src >= 0) {
        const double te = rng.uniform() * duration;
        bool clash = false;
        for (const auto& e : truth.events) clash |= (e.time_s == te);
        if (!clash && level_at(truth.initial, truth.events, te) == src) {
            while (!truth.events.empty() && truth.events.back().time_s > te) truth.events.pop_back();
            truth.events.push_back({te, src, dst});
            relax_cascade(q, dst, te, duration, rng, truth.events);
        }
    }
    return truth;
}

// Piecewise ring-up trajectory: within a segment at level s the signal decays
// from the boundary value toward level_response[s] with time constant
// ring_tau; at t = 0 the boundary value is 0.
void synthesize_baseband(const QubitConfig& q, const QubitTruth& truth, int n_samples, double dt,
                         std::vector<Complex>& out) {
    out.assign(n_samples, Complex{0.0, 0.0});
    Complex boundary_value{0.0, 0.0};
    double seg_start = 0.0;
    int level = truth.initial;
    std::size_t next_event = 0;
    int t = 0;
    while (t < n_samples) {
        const double seg_end = next_event < truth.events.size()
                                   ? truth.events[next_event].time_s
                                   : std::numeric_limits<double>::infinity();
        const Complex target = q.level_response[level];
        if (q.ring_tau <= 0.0) {
            while (t < n_samples && static_cast<double>(t) * dt < seg_end) {
                out[t] = target;
                ++t;
            }
            boundary_value = target;
        } else {
            const double rho = std::exp(-dt / q.ring_tau);
            // decay factor at the first sample inside the segment
            double decay = 0.0;
            bool first = true;
            while (t < n_samples && static_cast<double>(t) * dt < seg_end) {
                const double tk = static_cast<double>(t) * dt;
                if (first) {
                    decay = std::exp(-(tk - seg_start) / q.ring_tau);
                    first = false;
                }
                out[t] = target + (boundary_value - target) * decay;
                decay *= rho;
                ++t;
            }
            if (next_event < truth.events.size()) {
                boundary_value = target + (boundary_value - target) *
                                              std::exp(-(seg_end - seg_start) / q.ring_tau);
            }
        }
        if (next_event >= truth.events.size()) break;
        seg_start = seg_end;
        level = truth.events[next_event].to;
        ++next_event;
    }
}

}  // namespace

RawShot sample_trace(const DeviceConfig& device, const CarrierTable& carriers,
                     const std::vector<int>& prep, PhiloxRng& stream) {
    const int n = device.num_qubits();
    if (static_cast<int>(prep.size()) != n) {
        throw ConfigError("prep vector length " + std::to_string(prep.size()) +
                          " does not match qubit count " + std::to_string(n));
    }
    for (const int level : prep) {
        if (level < 0 || level > 2) throw ConfigError("prep levels must be 0, 1 or 2");
    }
    const int n_samples = device.num_samples();
    const double dt = 1.0 / device.sample_rate;

    RawShot shot;
    shot.prep_label = prep;
    shot.truth.qubits.resize(n);

    std::vector<std::vector<Complex>> baseband(n);
    for (int q = 0; q < n; ++q) {
        shot.truth.qubits[q] = draw_qubit_truth(device.qubits[q], prep[q], device.duration, stream);
        synthesize_baseband(device.qubits[q], shot.truth.qubits[q], n_samples, dt, baseband[q]);
    }

    // Crosstalk mix, up-conversion, additive noise.
    shot.i_samples.resize(n_samples);
    shot.q_samples.resize(n_samples);
    for (int t = 0; t < n_samples; ++t) {
        Complex x{0.0, 0.0};
        for (int q = 0; q < n; ++q) {
            Complex m{0.0, 0.0};
            const double* row = &device.crosstalk[static_cast<std::size_t>(q) * n];
            for (int j = 0; j < n; ++j) m += row[j] * baseband[j][t];
            x += m * carriers.carrier(q)[t];
        }
        const double ni = device.noise_std > 0.0 ? device.noise_std * stream.normal() : 0.0;
        const double nq = device.noise_std > 0.0 ? device.noise_std * stream.normal() : 0.0;
        shot.i_samples[t] = static_cast<float>(x.real() + ni);
        shot.q_samples[t] = static_cast<float>(x.imag() + nq);
    }
    return shot;
}

RawShot sample_trace(const DeviceConfig& device, const std::vector<int>& prep, PhiloxRng& stream) {
    device.validate();
    const CarrierTable carriers(device);
    return sample_trace(device, carriers, prep, stream);
}

TraceDataset generate_dataset(const DeviceConfig& device,
                              const std::vector<std::vector<int>>& states, int shots_per_state,
                              int threads) {
    device.validate();
    if (shots_per_state < 1) throw ConfigError("shots_per_state must be >= 1");
    if (states.empty()) throw ConfigError("at least one state required");
    {
        std::set<std::vector<int>> unique(states.begin(), states.end());
        if (unique.size() != states.size()) throw ConfigError("duplicate states rejected");
    }
    for (const auto& s : states) {
        if (static_cast<int>(s.size()) != device.num_qubits()) {
            throw ConfigError("state length does not match qubit count");
        }
    }

    TraceDataset ds;
    ds.device = device;
    ds.states = states;
    ds.shots_per_state = shots_per_state;
    const std::size_t total = states.size() * static_cast<std::size_t>(shots_per_state);
    ds.shots.resize(total);
    ds.split.resize(total);

    const CarrierTable carriers(device);
    parallel_for(total, threads, [&](std::size_t j) {
        PhiloxRng stream(device.seed, static_cast<std::uint64_t>(j));
        ds.shots[j] = sample_trace(device, carriers, states[j / shots_per_state], stream);
    });

    // 30/70 train/test per state, 15% of train tagged as validation.
    const int n_train = static_cast<int>(std::llround(0.3 * shots_per_state));
    const int n_val = static_cast<int>(std::llround(0.15 * n_train));
    for (std::size_t j = 0; j < total; ++j) {
        const int local = static_cast<int>(j % shots_per_state);
        if (local < n_train - n_val) {
            ds.split[j] = Split::Train;
        } else if (local < n_train) {
            ds.split[j] = Split::Val;
        } else {
            ds.split[j] = Split::Test;
        }
    }
    return ds;
}

std::vector<std::vector<int>> computational_states(int n_qubits) {
    std::vector<std::vector<int>> states;
    const std::size_t count = std::size_t{1} << n_qubits;
    states.reserve(count);
    for (std::size_t code = 0; code < count; ++code) {
        std::vector<int> s(n_qubits);
        for (int q = 0; q < n_qubits; ++q) s[q] = static_cast<int>((code >> q) & 1);
        states.push_back(std::move(s));
    }
    return states;
}

std::vector<std::vector<int>> all_level_states(int n_qubits) {
    std::vector<std::vector<int>> states;
    std::size_t count = 1;
    for (int q = 0; q < n_qubits; ++q) count *= 3;
    states.reserve(count);
    for (std::size_t code = 0; code < count; ++code) {
        std::vector<int> s(n_qubits);
        std::size_t rest = code;
        for (int q = 0; q < n_qubits; ++q) {
            s[q] = static_cast<int>(rest % 3);
            rest /= 3;
        }
        states.push_back(std::move(s));
    }
    return states;
}

DeviceConfig default_device(int n_qubits, std::uint64_t seed) {
    DeviceConfig device;
    device.sample_rate = 500e6;
    device.duration = 1e-6;
    device.noise_std = 0.7;
    device.seed = seed;
    device.qubits.resize(n_qubits);

    PhiloxRng rng(derive_seed(seed, "device-defaults"), 0);
    for (int q = 0; q < n_qubits; ++q) {
        QubitConfig& qc = device.qubits[q];
        qc.index = q;
        qc.if_freq = 50e6 + 30e6 * q;
        const double phase = 0.35 * q;
        const Complex rot = std::polar(1.0, phase);
        qc.level_response = {Complex{1.0, 0.0} * rot, Complex{-0.2, 0.9} * rot,
                             Complex{-1.44, -1.2} * rot};
        qc.ring_tau = 100e-9;
        qc.t1 = (7.0 + 33.0 * rng.uniform()) * 1e-6;
        qc.t1_level2 = qc.t1 / 2.0;
        qc.p_excite_01 = 1e-3;
        qc.p_excite_02 = 2e-4;
        qc.p_excite_12 = 2e-4;
        qc.p_leak_prep = 5e-3;
    }

    device.crosstalk.assign(static_cast<std::size_t>(n_qubits) * n_qubits, 0.0);
    for (int i = 0; i < n_qubits; ++i) {
        for (int j = 0; j < n_qubits; ++j) {
            double x = 0.0;
            if (i == j) x = 1.0;
            else if (std::abs(i - j) == 1) x = 0.05;
            else if (std::abs(i - j) == 2) x = 0.015;
            device.crosstalk[static_cast<std::size_t>(i) * n_qubits + j] = x;
        }
    }
    return device;
}

}  // namespace qrd
