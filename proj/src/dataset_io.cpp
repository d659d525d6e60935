#include "qrd/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "qrd/errors.hpp"
#include "qrd/serialize.hpp"

namespace qrd {

namespace {

constexpr char kMagic[4] = {'Q', 'R', 'T', '1'};

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = make_crc_table();
    return table;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

    const std::uint8_t* take(std::size_t count, const char* what) {
        if (count > remaining()) {
            throw TruncatedFileError(std::string("truncated file while reading ") + what);
        }
        const std::uint8_t* p = data_ + pos_;
        pos_ += count;
        return p;
    }

    std::uint32_t u32(const char* what) {
        const std::uint8_t* p = take(4, what);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed) {
    const auto& table = crc_table();
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::uint32_t c = 0;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        const std::streamsize got = in.gcount();
        if (got > 0) c = crc32(buf.data(), static_cast<std::size_t>(got), c);
    }
    return c;
}

void write_dataset(const TraceDataset& dataset, const std::string& path) {
    dataset.device.validate();
    const std::size_t n_shots = dataset.shots.size();
    if (dataset.split.size() != n_shots) throw DataError("split size does not match shot count");

    Json header;
    header["device"] = device_to_json(dataset.device);
    header["rng"] = std::string(PhiloxRng::kName);
    header["seed"] = dataset.device.seed;
    header["shot_count"] = n_shots;
    header["shots_per_state"] = dataset.shots_per_state;
    header["states"] = dataset.states;
    Json split = Json::array();
    for (const Split s : dataset.split) split.push_back(split_name(s));
    header["split"] = std::move(split);
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> bytes;
    const int n_samples = dataset.device.num_samples();
    bytes.reserve(16 + header_text.size() +
                  n_shots * (static_cast<std::size_t>(n_samples) * 8 + 128));
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32(bytes, kDatasetFormatVersion);
    put_u32(bytes, static_cast<std::uint32_t>(header_text.size()));
    bytes.insert(bytes.end(), header_text.begin(), header_text.end());

    for (const RawShot& shot : dataset.shots) {
        if (static_cast<int>(shot.i_samples.size()) != n_samples ||
            static_cast<int>(shot.q_samples.size()) != n_samples) {
            throw DataError("shot sample count does not match device config");
        }
        for (const float v : shot.i_samples) put_f32(bytes, v);
        for (const float v : shot.q_samples) put_f32(bytes, v);
        const std::string truth_text = truth_to_json(shot.truth).dump();
        put_u32(bytes, static_cast<std::uint32_t>(truth_text.size()));
        bytes.insert(bytes.end(), truth_text.begin(), truth_text.end());
    }

    // CRC covers everything after magic+version.
    put_u32(bytes, crc32(bytes.data() + 8, bytes.size() - 8));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path);
}

TraceDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw DataError("read failed for " + path);

    if (bytes.size() < 8) throw TruncatedFileError("file shorter than magic and version");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagicError("bad magic, not a dataset file");
    Reader header_reader(bytes.data() + 4, bytes.size() - 4);
    const std::uint32_t version = header_reader.u32("version");
    if (version != kDatasetFormatVersion) {
        throw BadVersionError("unsupported dataset format version " + std::to_string(version));
    }

    Reader reader(bytes.data() + 8, bytes.size() - 8);
    const std::uint32_t header_len = reader.u32("header length");
    const std::uint8_t* header_bytes = reader.take(header_len, "header");

    Json header;
    bool header_ok = true;
    try {
        header = Json::parse(header_bytes, header_bytes + header_len);
    } catch (const Json::exception&) {
        header_ok = false;
    }

    auto verify_crc = [&]() {
        if (bytes.size() < 12) throw TruncatedFileError("file too short for checksum");
        const std::size_t payload = bytes.size() - 12;
        const std::uint32_t stored =
            Reader(bytes.data() + 8 + payload, 4).u32("checksum");
        const std::uint32_t actual = crc32(bytes.data() + 8, payload);
        if (stored != actual) throw ChecksumError("dataset checksum mismatch");
    };

    if (!header_ok) {
        verify_crc();
        throw DataError("corrupt dataset header");
    }

    TraceDataset ds;
    std::size_t n_shots = 0;
    try {
        ds.device = device_from_json(header.at("device"));
        const std::string rng_name = header.at("rng").get<std::string>();
        if (rng_name != PhiloxRng::kName) {
            throw DataError("unsupported rng '" + rng_name + "'");
        }
        n_shots = header.at("shot_count").get<std::size_t>();
        ds.shots_per_state = header.at("shots_per_state").get<int>();
        ds.states = header.at("states").get<std::vector<std::vector<int>>>();
        for (const auto& tag : header.at("split")) {
            ds.split.push_back(split_from_name(tag.get<std::string>()));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad dataset header: ") + e.what());
    }
    if (ds.split.size() != n_shots) throw DataError("split list does not match shot count");

    // Structural walk before the checksum so truncation is reported as such.
    const int n_samples = ds.device.num_samples();
    const std::size_t walk_start = reader.pos();
    for (std::size_t j = 0; j < n_shots; ++j) {
        reader.take(static_cast<std::size_t>(n_samples) * 8, "samples");
        const std::uint32_t truth_len = reader.u32("truth length");
        reader.take(truth_len, "truth record");
    }
    if (reader.remaining() < 4) throw TruncatedFileError("missing checksum");
    if (reader.remaining() > 4) throw DataError("trailing bytes after checksum");
    verify_crc();

    Reader shots_reader(bytes.data() + 8 + walk_start, bytes.size() - 12 - walk_start);
    ds.shots.resize(n_shots);
    for (std::size_t j = 0; j < n_shots; ++j) {
        RawShot& shot = ds.shots[j];
        shot.i_samples.resize(n_samples);
        shot.q_samples.resize(n_samples);
        for (int t = 0; t < n_samples; ++t) shot.i_samples[t] = shots_reader.f32("sample");
        for (int t = 0; t < n_samples; ++t) shot.q_samples[t] = shots_reader.f32("sample");
        const std::uint32_t truth_len = shots_reader.u32("truth length");
        const std::uint8_t* truth_bytes = shots_reader.take(truth_len, "truth record");
        Json truth_json;
        try {
            truth_json = Json::parse(truth_bytes, truth_bytes + truth_len);
        } catch (const Json::exception& e) {
            throw DataError(std::string("bad ground-truth record: ") + e.what());
        }
        shot.truth = truth_from_json(truth_json);
        shot.prep_label.reserve(shot.truth.qubits.size());
        for (const auto& qt : shot.truth.qubits) shot.prep_label.push_back(qt.prepared);
    }
    return ds;
}

}  // namespace qrd
