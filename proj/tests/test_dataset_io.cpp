#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "qrd/dataset_io.hpp"
#include "qrd/errors.hpp"
#include "qrd/sim.hpp"

using namespace qrd;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

TraceDataset small_dataset() {
    DeviceConfig d = default_device(2, 909);
    d.sample_rate = 50e6;  // 50 samples, keeps files small
    d.qubits[0].if_freq = 5e6;
    d.qubits[1].if_freq = 8e6;
    return generate_dataset(d, computational_states(2), 10);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("crc32 known answer") {
    const char* s = "123456789";
    CHECK(crc32(s, 9) == 0xCBF43926u);
}

TEST_CASE("dataset round trip") {
    TraceDataset ds = small_dataset();
    const auto path = temp_file("qrd_roundtrip.qrt");
    write_dataset(ds, path.string());
    TraceDataset back = read_dataset(path.string());

    REQUIRE(back.shots.size() == ds.shots.size());
    CHECK(back.device.seed == ds.device.seed);
    CHECK(back.device.noise_std == ds.device.noise_std);
    CHECK(back.device.crosstalk == ds.device.crosstalk);
    CHECK(back.states == ds.states);
    CHECK(back.split == ds.split);
    for (std::size_t j = 0; j < ds.shots.size(); ++j) {
        REQUIRE(back.shots[j].i_samples == ds.shots[j].i_samples);
        REQUIRE(back.shots[j].q_samples == ds.shots[j].q_samples);
        REQUIRE(back.shots[j].prep_label == ds.shots[j].prep_label);
        const auto& a = back.shots[j].truth.qubits;
        const auto& b = ds.shots[j].truth.qubits;
        REQUIRE(a.size() == b.size());
        for (std::size_t q = 0; q < a.size(); ++q) {
            CHECK(a[q].prepared == b[q].prepared);
            CHECK(a[q].initial == b[q].initial);
            REQUIRE(a[q].events.size() == b[q].events.size());
            for (std::size_t e = 0; e < a[q].events.size(); ++e) {
                CHECK(a[q].events[e].time_s == b[q].events[e].time_s);
                CHECK(a[q].events[e].from == b[q].events[e].from);
                CHECK(a[q].events[e].to == b[q].events[e].to);
            }
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("identical generation gives byte-identical files") {
    DeviceConfig d = default_device(2, 404);
    d.sample_rate = 50e6;
    d.qubits[0].if_freq = 5e6;
    d.qubits[1].if_freq = 8e6;
    const auto p1 = temp_file("qrd_det1.qrt");
    const auto p2 = temp_file("qrd_det2.qrt");
    write_dataset(generate_dataset(d, computational_states(2), 10, 1), p1.string());
    write_dataset(generate_dataset(d, computational_states(2), 10, 4), p2.string());
    CHECK(slurp(p1) == slurp(p2));
    CHECK(crc32_file(p1.string()) == crc32_file(p2.string()));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("corrupting a payload byte raises a checksum error") {
    TraceDataset ds = small_dataset();
    const auto path = temp_file("qrd_corrupt.qrt");
    write_dataset(ds, path.string());
    auto bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;  // inside the sample payload
    spit(path, bytes);
    CHECK_THROWS_AS(read_dataset(path.string()), ChecksumError);
    std::filesystem::remove(path);
}

TEST_CASE("unsupported version is a distinct error") {
    TraceDataset ds = small_dataset();
    const auto path = temp_file("qrd_version.qrt");
    write_dataset(ds, path.string());
    auto bytes = slurp(path);
    bytes[4] = 99;  // version field
    spit(path, bytes);
    CHECK_THROWS_AS(read_dataset(path.string()), BadVersionError);
    std::filesystem::remove(path);
}

TEST_CASE("bad magic is a distinct error") {
    TraceDataset ds = small_dataset();
    const auto path = temp_file("qrd_magic.qrt");
    write_dataset(ds, path.string());
    auto bytes = slurp(path);
    bytes[0] = 'X';
    spit(path, bytes);
    CHECK_THROWS_AS(read_dataset(path.string()), BadMagicError);
    std::filesystem::remove(path);
}

TEST_CASE("truncated file is a distinct error") {
    TraceDataset ds = small_dataset();
    const auto path = temp_file("qrd_trunc.qrt");
    write_dataset(ds, path.string());
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - bytes.size() / 3);
    spit(path, bytes);
    CHECK_THROWS_AS(read_dataset(path.string()), TruncatedFileError);
    std::filesystem::remove(path);
}
