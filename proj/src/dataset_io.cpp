#include "msfum/dataset_io.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msfum {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string hex_prefix(const std::string& bytes, size_t count) {
    std::ostringstream os;
    for (size_t i = 0; i < std::min(count, bytes.size()); ++i) {
        const unsigned char c = static_cast<unsigned char>(bytes[i]);
        if (std::isprint(c)) {
            os << c;
        } else {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\x%02X", c);
            os << buf;
        }
    }
    return os.str();
}

// Netpbm header token reader: skips whitespace and '#' comments.
struct PnmParser {
    const std::string& bytes;
    size_t pos = 0;

    explicit PnmParser(const std::string& b) : bytes(b) {}

    void skip_space() {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    int64_t read_int(const std::string& what, const std::string& path) {
        skip_space();
        const size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (pos == start) io_fail("'" + path + "': malformed header, expected " + what);
        return std::stoll(bytes.substr(start, pos - start));
    }
};

void write_atomic(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) io_fail("cannot write '" + tmp + "'");
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) io_fail("short write to '" + tmp + "'");
    }
    fs::rename(tmp, path);
}

void append_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32(out, bits);
}

struct Cursor {
    const std::string& bytes;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n, const char* what) {
        if (pos + n > bytes.size()) {
            io_fail("'" + path + "': truncated checkpoint while reading " + std::string(what));
        }
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

Manifest Manifest::load(const std::string& path, bool check_paths) {
    std::ifstream in(path);
    if (!in) io_fail("cannot open manifest '" + path + "'");
    const fs::path base = fs::path(path).parent_path();
    Manifest m;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "name") ls >> m.name;
            if (key == "unit_scale") ls >> m.unit_scale;
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            io_fail("manifest '" + path + "' line " + std::to_string(lineno) +
                    ": expected <rgb>\\t<depth>\\t<split>");
        }
        ManifestEntry e;
        e.rgb_path = line.substr(0, t1);
        e.depth_path = line.substr(t1 + 1, t2 - t1 - 1);
        e.split = line.substr(t2 + 1);
        auto resolve = [&base](const std::string& p) {
            const fs::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).string();
        };
        e.rgb_path = resolve(e.rgb_path);
        e.depth_path = resolve(e.depth_path);
        if (check_paths) {
            if (!fs::exists(e.rgb_path)) io_fail("manifest entry missing file: " + e.rgb_path);
            if (!fs::exists(e.depth_path)) io_fail("manifest entry missing file: " + e.depth_path);
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ostringstream os;
    os << "# name " << name << "\n";
    os << "# unit_scale " << unit_scale << "\n";
    for (const auto& e : entries) {
        os << e.rgb_path << "\t" << e.depth_path << "\t" << e.split << "\n";
    }
    write_atomic(path, os.str());
}

// ---------------------------------------------------------------------------
// Depth / RGB rasters

DepthMap load_depth(const std::string& path, double unit_scale) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        std::string msg = "'" + path + "': unsupported depth format, header bytes [" +
                          hex_prefix(bytes, 8) + "]; expected binary PGM (P5)";
        if (bytes.size() >= 4 && bytes.compare(1, 3, "PNG") == 0) {
            msg += " — convert PNG first, e.g. `magick depth.png depth.pgm`";
        }
        io_fail(msg);
    }
    PnmParser p(bytes);
    p.pos = 2;
    const int64_t w = p.read_int("width", path);
    const int64_t h = p.read_int("height", path);
    const int64_t maxval = p.read_int("maxval", path);
    if (maxval != 65535 && maxval > 255) {
        io_fail("'" + path + "': unsupported PGM bit depth, maxval=" + std::to_string(maxval) +
                " (expected 255 or 65535)");
    }
    ++p.pos;  // single whitespace after maxval
    const int64_t bpp = maxval > 255 ? 2 : 1;
    const size_t need = static_cast<size_t>(h * w * bpp);
    if (bytes.size() - p.pos < need) {
        io_fail("'" + path + "': truncated PGM payload, need " + std::to_string(need) +
                " bytes, have " + std::to_string(bytes.size() - p.pos));
    }
    DepthMap d;
    d.h = h;
    d.w = w;
    d.unit_scale = unit_scale;
    d.values.resize(static_cast<size_t>(h * w));
    d.valid.assign(static_cast<size_t>(h * w), 1);
    const unsigned char* raw = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos);
    for (int64_t i = 0; i < h * w; ++i) {
        // PGM multi-byte samples are big-endian
        const uint32_t sample = bpp == 2
                                    ? (static_cast<uint32_t>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                    : raw[i];
        d.values[static_cast<size_t>(i)] = static_cast<double>(sample) * unit_scale;
        if (sample == 0) d.valid[static_cast<size_t>(i)] = 0;
    }
    return d;
}

SaveReport save_depth(const DepthMap& d, const std::string& path, DepthFormat format) {
    const int64_t maxval = format == DepthFormat::pgm16 ? 65535 : 255;
    std::string out;
    out += "P5\n" + std::to_string(d.w) + " " + std::to_string(d.h) + "\n" +
           std::to_string(maxval) + "\n";
    SaveReport report;
    for (int64_t i = 0; i < d.h * d.w; ++i) {
        int64_t sample = static_cast<int64_t>(
            std::llround(d.values[static_cast<size_t>(i)] / d.unit_scale));
        if (sample < 0 || sample > maxval) {
            ++report.clamped;
            sample = std::clamp<int64_t>(sample, 0, maxval);
        }
        if (format == DepthFormat::pgm16) {
            out.push_back(static_cast<char>((sample >> 8) & 0xFF));
            out.push_back(static_cast<char>(sample & 0xFF));
        } else {
            out.push_back(static_cast<char>(sample & 0xFF));
        }
    }
    write_atomic(path, out);
    return report;
}

GuidanceImage load_rgb(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        std::string msg = "'" + path + "': unsupported color format, header bytes [" +
                          hex_prefix(bytes, 8) + "]; expected binary PPM (P6)";
        if (bytes.size() >= 4 && bytes.compare(1, 3, "PNG") == 0) {
            msg += " — convert PNG first, e.g. `magick image.png image.ppm`";
        }
        io_fail(msg);
    }
    PnmParser p(bytes);
    p.pos = 2;
    const int64_t w = p.read_int("width", path);
    const int64_t h = p.read_int("height", path);
    const int64_t maxval = p.read_int("maxval", path);
    if (maxval != 255) {
        io_fail("'" + path + "': unsupported PPM bit depth, maxval=" + std::to_string(maxval));
    }
    ++p.pos;
    const size_t need = static_cast<size_t>(h * w * 3);
    if (bytes.size() - p.pos < need) {
        io_fail("'" + path + "': truncated PPM payload");
    }
    GuidanceImage img;
    img.h = h;
    img.w = w;
    img.values.resize(need);
    const unsigned char* raw = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos);
    for (size_t i = 0; i < need; ++i) {
        img.values[i] = static_cast<double>(raw[i]) / 255.0;
    }
    return img;
}

void save_rgb(const GuidanceImage& img, const std::string& path) {
    std::string out;
    out += "P6\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    for (double v : img.values) {
        const int64_t s = std::clamp<int64_t>(std::llround(v * 255.0), 0, 255);
        out.push_back(static_cast<char>(s));
    }
    write_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoint

void checkpoint_save_raw(const NetworkConfig& cfg, const std::vector<RawTensorEntry>& entries,
                         const std::string& path) {
    std::string out = "MSFU";
    append_u32(out, kCheckpointVersion);
    append_u32(out, static_cast<uint32_t>(cfg.scale));
    append_u32(out, static_cast<uint32_t>(cfg.base_channels));
    append_u32(out, static_cast<uint32_t>(cfg.n_state));
    append_u32(out, static_cast<uint32_t>(cfg.channel_cap));
    uint32_t flags = 0;
    if (cfg.ablation.use_guidance) flags |= 1u;
    if (cfg.ablation.use_rdcb) flags |= 2u;
    if (cfg.ablation.use_mamba) flags |= 4u;
    append_u32(out, flags);
    append_u64(out, static_cast<uint64_t>(entries.size()));
    for (const auto& e : entries) {
        append_u32(out, static_cast<uint32_t>(e.name.size()));
        out += e.name;
        append_u32(out, static_cast<uint32_t>(e.shape.size()));
        for (int64_t d : e.shape) append_u64(out, static_cast<uint64_t>(d));
        for (float v : e.data) append_f32(out, v);
    }
    write_atomic(path, out);
}

RawCheckpoint checkpoint_load_raw(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 4 || bytes.compare(0, 4, "MSFU") != 0) {
        io_fail("'" + path + "': bad checkpoint magic [" + hex_prefix(bytes, 4) + "]");
    }
    Cursor c{bytes, 4, path};
    const uint32_t version = c.u32("version");
    if (version != kCheckpointVersion) {
        io_fail("'" + path + "': unsupported checkpoint version " + std::to_string(version));
    }
    RawCheckpoint ck;
    ck.cfg.scale = c.u32("scale");
    ck.cfg.base_channels = c.u32("base_channels");
    ck.cfg.n_state = c.u32("n_state");
    ck.cfg.channel_cap = c.u32("channel_cap");
    const uint32_t flags = c.u32("ablation flags");
    ck.cfg.ablation.use_guidance = (flags & 1u) != 0;
    ck.cfg.ablation.use_rdcb = (flags & 2u) != 0;
    ck.cfg.ablation.use_mamba = (flags & 4u) != 0;

    const uint64_t n_entries = c.u64("entry count");
    for (uint64_t e = 0; e < n_entries; ++e) {
        RawTensorEntry entry;
        const uint32_t name_len = c.u32("name length");
        c.need(name_len, "name");
        entry.name = bytes.substr(c.pos, name_len);
        c.pos += name_len;
        const uint32_t rank = c.u32("rank");
        entry.shape.resize(rank);
        int64_t numel = 1;
        for (auto& d : entry.shape) {
            d = static_cast<int64_t>(c.u64("dim"));
            numel *= d;
        }
        entry.data.resize(static_cast<size_t>(numel));
        for (auto& v : entry.data) v = c.f32("scalar");
        ck.entries.push_back(std::move(entry));
    }
    if (c.pos != bytes.size()) {
        io_fail("'" + path + "': trailing bytes after last checkpoint entry");
    }
    return ck;
}

void checkpoint_save(const Network<float>& net, const std::string& path) {
    std::vector<RawTensorEntry> entries;
    entries.reserve(static_cast<size_t>(net.params().tensor_count()));
    for (const auto& [name, t] : net.params().entries()) {
        entries.push_back({name, t.shape(), t.data()});
    }
    checkpoint_save_raw(net.config(), entries, path);
}

Network<float> checkpoint_load(const std::string& path) {
    RawCheckpoint ck = checkpoint_load_raw(path);
    Network<float> net(ck.cfg, 0);
    if (ck.entries.size() != static_cast<size_t>(net.params().tensor_count())) {
        io_fail("'" + path + "': checkpoint has " + std::to_string(ck.entries.size()) +
                " tensors but the embedded config builds " +
                std::to_string(net.params().tensor_count()));
    }
    for (const auto& e : ck.entries) {
        if (!net.params().has(e.name)) {
            io_fail("'" + path + "': checkpoint names unknown parameter '" + e.name + "'");
        }
        Tensor<float>& t = net.params().get(e.name);
        if (e.shape != t.shape()) {
            io_fail("'" + path + "': parameter '" + e.name + "' shape " + shape_str(e.shape) +
                    " does not match config shape " + shape_str(t.shape()));
        }
        t.data() = e.data;
    }
    return net;
}

}  // namespace msfum
