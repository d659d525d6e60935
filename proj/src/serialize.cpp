#include "qrd/serialize.hpp"

#include "qrd/errors.hpp"

namespace qrd {

Json complex_to_json(const Complex& c) { return Json::array({c.real(), c.imag()}); }

Complex complex_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw DataError("complex value must be [re, im]");
    return Complex{j[0].get<double>(), j[1].get<double>()};
}

Json device_to_json(const DeviceConfig& device) {
    Json j;
    j["sample_rate"] = device.sample_rate;
    j["duration"] = device.duration;
    j["noise_std"] = device.noise_std;
    j["seed"] = device.seed;
    Json rows = Json::array();
    const int n = device.num_qubits();
    for (int i = 0; i < n; ++i) {
        Json row = Json::array();
        for (int k = 0; k < n; ++k) row.push_back(device.crosstalk[static_cast<std::size_t>(i) * n + k]);
        rows.push_back(std::move(row));
    }
    j["crosstalk"] = std::move(rows);
    Json qubits = Json::array();
    for (const auto& q : device.qubits) {
        Json qj;
        qj["index"] = q.index;
        qj["if_freq"] = q.if_freq;
        qj["level_response"] = Json::array({complex_to_json(q.level_response[0]),
                                            complex_to_json(q.level_response[1]),
                                            complex_to_json(q.level_response[2])});
        qj["ring_tau"] = q.ring_tau;
        qj["t1"] = q.t1;
        qj["t1_level2"] = q.t1_level2;
        qj["p_excite_01"] = q.p_excite_01;
        qj["p_excite_02"] = q.p_excite_02;
        qj["p_excite_12"] = q.p_excite_12;
        qj["p_leak_prep"] = q.p_leak_prep;
        qubits.push_back(std::move(qj));
    }
    j["qubits"] = std::move(qubits);
    return j;
}

DeviceConfig device_from_json(const Json& j) {
    DeviceConfig device;
    try {
        device.sample_rate = j.at("sample_rate").get<double>();
        device.duration = j.at("duration").get<double>();
        device.noise_std = j.at("noise_std").get<double>();
        device.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& qj : j.at("qubits")) {
            QubitConfig q;
            q.index = qj.at("index").get<int>();
            q.if_freq = qj.at("if_freq").get<double>();
            const auto& lr = qj.at("level_response");
            if (!lr.is_array() || lr.size() != 3) throw DataError("level_response must have 3 entries");
            for (int s = 0; s < 3; ++s) q.level_response[s] = complex_from_json(lr[s]);
            q.ring_tau = qj.at("ring_tau").get<double>();
            q.t1 = qj.at("t1").get<double>();
            q.t1_level2 = qj.at("t1_level2").get<double>();
            q.p_excite_01 = qj.at("p_excite_01").get<double>();
            q.p_excite_02 = qj.at("p_excite_02").get<double>();
            q.p_excite_12 = qj.at("p_excite_12").get<double>();
            q.p_leak_prep = qj.at("p_leak_prep").get<double>();
            device.qubits.push_back(q);
        }
        const int n = device.num_qubits();
        const auto& rows = j.at("crosstalk");
        if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
            throw DataError("crosstalk must be n x n");
        }
        device.crosstalk.resize(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            const auto& row = rows[i];
            if (!row.is_array() || static_cast<int>(row.size()) != n) {
                throw DataError("crosstalk must be n x n");
            }
            for (int k = 0; k < n; ++k) {
                device.crosstalk[static_cast<std::size_t>(i) * n + k] = row[k].get<double>();
            }
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad device config: ") + e.what());
    }
    return device;
}

std::string transition_name(int from, int to) {
    return std::to_string(from) + "->" + std::to_string(to);
}

std::pair<int, int> transition_from_name(const std::string& name) {
    if (name.size() != 4 || name[1] != '-' || name[2] != '>') {
        throw DataError("bad transition name: " + name);
    }
    const int from = name[0] - '0';
    const int to = name[3] - '0';
    if (from < 0 || from > 2 || to < 0 || to > 2 || from == to) {
        throw DataError("bad transition name: " + name);
    }
    return {from, to};
}

Json truth_to_json(const GroundTruth& truth) {
    Json j;
    Json qubits = Json::array();
    for (const auto& qt : truth.qubits) {
        Json qj;
        qj["prepared"] = qt.prepared;
        qj["initial"] = qt.initial;
        Json events = Json::array();
        for (const auto& e : qt.events) {
            events.push_back(Json::array({e.time_s, transition_name(e.from, e.to)}));
        }
        qj["events"] = std::move(events);
        qubits.push_back(std::move(qj));
    }
    j["qubits"] = std::move(qubits);
    return j;
}

GroundTruth truth_from_json(const Json& j) {
    GroundTruth truth;
    try {
        for (const auto& qj : j.at("qubits")) {
            QubitTruth qt;
            qt.prepared = qj.at("prepared").get<int>();
            qt.initial = qj.at("initial").get<int>();
            for (const auto& ej : qj.at("events")) {
                if (!ej.is_array() || ej.size() != 2) throw DataError("bad event record");
                const auto [from, to] = transition_from_name(ej[1].get<std::string>());
                qt.events.push_back({ej[0].get<double>(), from, to});
            }
            truth.qubits.push_back(std::move(qt));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad ground-truth record: ") + e.what());
    }
    return truth;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "test";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw DataError("bad split tag: " + name);
}

}  // namespace qrd
