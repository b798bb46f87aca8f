#include "lenslab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lenslab/hash.hpp"

namespace lenslab {

std::string fingerprint_hex(uint64_t fp) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[fp & 0xf];
        fp >>= 4;
    }
    return out;
}

} // namespace lenslab

namespace lenslab::ckpt {

namespace {

static_assert(sizeof(double) == 8, "payload layout assumes 8-byte doubles");

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated while reading " + what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

const TensorRecord& Container::tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
}

void save(const std::string& path, const Container& c) {
    nlohmann::ordered_json header;
    header["kind"] = c.kind;
    header["meta"] = c.meta;
    auto& dir = header["tensors"] = nlohmann::ordered_json::array();
    for (const auto& t : c.tensors) {
        if (t.rows < 0 || t.cols < 0 ||
            t.data.size() != static_cast<size_t>(t.rows) * static_cast<size_t>(t.cols))
            throw std::runtime_error("checkpoint: tensor '" + t.name + "' shape/data mismatch");
        dir.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
    }
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : c.tensors)
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    os.flush();
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Container load(const std::string& path, const std::string& expected_kind) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    const uint32_t version = read_u32(is, "version");
    if (version != kVersion)
        throw std::runtime_error("checkpoint: version mismatch in " + path + ": file has " +
                                 std::to_string(version) + ", this build reads " +
                                 std::to_string(kVersion));

    const uint32_t header_len = read_u32(is, "header length");
    std::string hs(header_len, '\0');
    is.read(hs.data(), header_len);
    if (!is) throw std::runtime_error("checkpoint: truncated header in " + path);

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(hs);
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint: unparseable header in " + path + ": " + e.what());
    }

    Container c;
    c.kind = header.value("kind", std::string{});
    if (c.kind != expected_kind)
        throw std::runtime_error("checkpoint: kind mismatch in " + path + ": file holds '" +
                                 c.kind + "', expected '" + expected_kind + "'");
    c.meta = header.value("meta", nlohmann::ordered_json::object());

    for (const auto& entry : header.at("tensors")) {
        TensorRecord t;
        t.name = entry.at("name").get<std::string>();
        t.rows = entry.at("rows").get<int>();
        t.cols = entry.at("cols").get<int>();
        if (t.rows < 0 || t.cols < 0)
            throw std::runtime_error("checkpoint: negative shape for tensor '" + t.name + "'");
        t.data.resize(static_cast<size_t>(t.rows) * static_cast<size_t>(t.cols));
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is)
            throw std::runtime_error("checkpoint: truncated payload for tensor '" + t.name +
                                     "' in " + path);
        c.tensors.push_back(std::move(t));
    }
    // Anything left over means the directory and payload disagree.
    char extra;
    is.read(&extra, 1);
    if (!is.eof())
        throw std::runtime_error("checkpoint: trailing bytes after payload in " + path);
    return c;
}

} // namespace lenslab::ckpt
