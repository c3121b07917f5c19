#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "msfum/dataset_io.hpp"
#include "msfum/ops.hpp"

using namespace msfum;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("msfum_io_" + name)).string();
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("load_depth decodes a 16-bit PGM with the zero-invalid convention") {
    const std::string path = tmp_path("fixture16.pgm");
    std::string bytes = "P5\n2 2\n65535\n";
    for (uint16_t sample : {0, 1000, 2000, 3000}) {
        bytes.push_back(static_cast<char>(sample >> 8));
        bytes.push_back(static_cast<char>(sample & 0xFF));
    }
    write_bytes(path, bytes);
    DepthMap d = load_depth(path, 0.1);
    CHECK(d.h == 2);
    CHECK(d.w == 2);
    CHECK(d.values[0] == 0.0);
    CHECK(d.values[1] == doctest::Approx(100.0));
    CHECK(d.values[2] == doctest::Approx(200.0));
    CHECK(d.values[3] == doctest::Approx(300.0));
    CHECK_FALSE(d.is_valid(0));
    CHECK(d.is_valid(1));
}

TEST_CASE("load_depth decodes 8-bit PGM") {
    const std::string path = tmp_path("fixture8.pgm");
    write_bytes(path, std::string("P5\n2 1\n255\n") + char(10) + char(255));
    DepthMap d = load_depth(path, 1.0);
    CHECK(d.values[0] == 10.0);
    CHECK(d.values[1] == 255.0);
}

TEST_CASE("save_depth then load_depth round-trips exactly") {
    Rng rng(3);
    DepthMap d;
    d.h = 7;
    d.w = 5;
    d.unit_scale = 0.25;
    d.values.resize(35);
    for (auto& v : d.values) v = 0.25 * double(rng.uniform_int(1, 65535));
    const std::string path = tmp_path("roundtrip.pgm");
    SaveReport rep = save_depth(d, path);
    CHECK(rep.clamped == 0);
    DepthMap back = load_depth(path, 0.25);
    for (size_t i = 0; i < d.values.size(); ++i) CHECK(back.values[i] == d.values[i]);

    // identical input produces identical bytes
    save_depth(d, tmp_path("roundtrip2.pgm"));
    CHECK(read_bytes(path) == read_bytes(tmp_path("roundtrip2.pgm")));
}

TEST_CASE("save_depth reports clamping and a constant map repeats one sample") {
    DepthMap d;
    d.h = 1;
    d.w = 3;
    d.values = {70000.0, -5.0, 100.0};
    SaveReport rep = save_depth(d, tmp_path("clamp.pgm"));
    CHECK(rep.clamped == 2);

    DepthMap c;
    c.h = 2;
    c.w = 2;
    c.values.assign(4, 1234.0);
    save_depth(c, tmp_path("const.pgm"));
    const std::string bytes = read_bytes(tmp_path("const.pgm"));
    const std::string payload = bytes.substr(bytes.size() - 8);
    for (int i = 0; i < 4; ++i) {
        CHECK(static_cast<unsigned char>(payload[2 * i]) == (1234 >> 8));
        CHECK(static_cast<unsigned char>(payload[2 * i + 1]) == (1234 & 0xFF));
    }
}

TEST_CASE("truncated depth file raises, with no partial map") {
    const std::string path = tmp_path("truncated.pgm");
    write_bytes(path, "P5\n4 4\n65535\n\x01\x02");
    CHECK_THROWS_WITH_AS(load_depth(path, 1.0), doctest::Contains("truncated"),
                         std::runtime_error);
}

TEST_CASE("PNG input is rejected with the header bytes and a conversion hint") {
    const std::string path = tmp_path("wrong.png");
    write_bytes(path, std::string("\x89PNG\r\n\x1a\n", 8));
    CHECK_THROWS_WITH_AS(load_depth(path, 1.0), doctest::Contains("convert PNG"),
                         std::runtime_error);
}

TEST_CASE("load_rgb decodes PPM fixtures exactly") {
    const std::string white = tmp_path("white.ppm");
    write_bytes(white, std::string("P6\n2 1\n255\n") + std::string(6, char(255)));
    GuidanceImage w = load_rgb(white);
    for (double v : w.values) CHECK(v == 1.0);

    const std::string path = tmp_path("fixture.ppm");
    std::string bytes = "P6\n2 2\n255\n";
    for (int i = 0; i < 12; ++i) bytes.push_back(static_cast<char>(i * 20));
    write_bytes(path, bytes);
    GuidanceImage img = load_rgb(path);
    for (int i = 0; i < 12; ++i) {
        CHECK(img.values[static_cast<size_t>(i)] == doctest::Approx(double(i * 20) / 255.0));
    }
    CHECK(img.at(1, 0, 2) == doctest::Approx(double(8 * 20) / 255.0));
}

TEST_CASE("save_rgb round-trips quantized values") {
    Rng rng(9);
    GuidanceImage img;
    img.h = 3;
    img.w = 4;
    img.values.resize(36);
    for (auto& v : img.values) v = double(rng.uniform_int(0, 255)) / 255.0;
    const std::string path = tmp_path("rt.ppm");
    save_rgb(img, path);
    GuidanceImage back = load_rgb(path);
    for (size_t i = 0; i < img.values.size(); ++i) CHECK(back.values[i] == img.values[i]);
}

TEST_CASE("manifest preserves order, splits, and directives") {
    const std::string dir = tmp_path("manifest_dir");
    fs::create_directories(dir);
    // touch the referenced files so existence checks pass
    for (const char* name : {"a.ppm", "a.pgm", "b.ppm", "b.pgm"}) {
        write_bytes((fs::path(dir) / name).string(), "x");
    }
    Manifest m;
    m.name = "demo";
    m.unit_scale = 0.5;
    m.entries = {{"a.ppm", "a.pgm", "train"}, {"b.ppm", "b.pgm", "val"}};
    const std::string path = (fs::path(dir) / "m.tsv").string();
    m.save(path);
    Manifest back = Manifest::load(path);
    CHECK(back.name == "demo");
    CHECK(back.unit_scale == 0.5);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].split == "train");
    CHECK(back.entries[1].split == "val");
    CHECK(fs::path(back.entries[0].depth_path).filename() == "a.pgm");

    Manifest missing;
    missing.entries = {{"nope.ppm", "nope.pgm", "train"}};
    const std::string bad = (fs::path(dir) / "bad.tsv").string();
    missing.save(bad);
    CHECK_THROWS_AS(Manifest::load(bad), std::runtime_error);
}

TEST_CASE("checkpoint round-trip is bitwise and forward output is unchanged") {
    NetworkConfig cfg;
    cfg.scale = 4;
    cfg.base_channels = 4;
    cfg.channel_cap = 8;
    cfg.n_state = 3;
    Network<float> net(cfg, 77);
    const std::string path = tmp_path("net.msfu");
    checkpoint_save(net, path);
    Network<float> loaded = checkpoint_load(path);

    REQUIRE(loaded.params().tensor_count() == net.params().tensor_count());
    for (int64_t i = 0; i < net.params().tensor_count(); ++i) {
        const auto& a = net.params().entries()[static_cast<size_t>(i)];
        const auto& b = loaded.params().entries()[static_cast<size_t>(i)];
        CHECK(a.first == b.first);
        CHECK(a.second.data() == b.second.data());
    }

    Rng rng(78);
    TensorF d = TensorF::uniform({1, 1, 8, 8}, rng, 0, 1);
    TensorF g = TensorF::uniform({1, 3, 8, 8}, rng, 0, 1);
    NoGradGuard ng;
    TensorF y1 = net.forward(d, g);
    TensorF y2 = loaded.forward(d, g);
    for (size_t i = 0; i < y1.data().size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);

    // second save of the loaded network is byte-identical
    checkpoint_save(loaded, tmp_path("net2.msfu"));
    CHECK(read_bytes(path) == read_bytes(tmp_path("net2.msfu")));
}

TEST_CASE("corrupting a header byte fails the load loudly") {
    NetworkConfig cfg;
    cfg.scale = 4;
    cfg.base_channels = 4;
    cfg.channel_cap = 8;
    cfg.n_state = 3;
    Network<float> net(cfg, 5);
    const std::string path = tmp_path("corrupt.msfu");
    checkpoint_save(net, path);
    std::string bytes = read_bytes(path);
    bytes[1] = 'X';  // magic
    write_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(checkpoint_load(path), doctest::Contains("magic"), std::runtime_error);

    checkpoint_save(net, path);
    bytes = read_bytes(path);
    bytes[4] = 9;  // version
    write_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(checkpoint_load(path), doctest::Contains("version"),
                         std::runtime_error);

    checkpoint_save(net, path);
    bytes = read_bytes(path);
    bytes.pop_back();  // truncate payload
    write_bytes(path, bytes);
    CHECK_THROWS_AS(checkpoint_load(path), std::runtime_error);
}

TEST_CASE("an empty parameter set is a valid container") {
    NetworkConfig cfg;
    const std::string path = tmp_path("empty.msfu");
    checkpoint_save_raw(cfg, {}, path);
    RawCheckpoint ck = checkpoint_load_raw(path);
    CHECK(ck.entries.empty());
    CHECK(ck.cfg.scale == cfg.scale);
}
