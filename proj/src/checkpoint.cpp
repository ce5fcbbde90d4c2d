#include "cobot/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace cobot {

namespace {

constexpr char kMagic[5] = {'C', 'O', 'B', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw IoError("checkpoint: truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 5);
    auto params = store.all();
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const ParamTensor* p : params) {
        put_u32(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put_u32(os, static_cast<std::uint32_t>(p->value.n1()));
        put_u32(os, static_cast<std::uint32_t>(p->value.n2()));
        put_u32(os, static_cast<std::uint32_t>(p->value.n3()));
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(sizeof(double) * p->value.numel()));
    }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

namespace {

struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

std::vector<Entry> read_entries(const std::string& path, bool with_data) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[5];
    if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    const std::uint32_t count = get_u32(is, "entry count");
    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        const std::uint32_t len = get_u32(is, "name length");
        e.name.resize(len);
        if (!is.read(e.name.data(), len)) throw IoError("checkpoint: truncated name");
        e.shape.n1 = static_cast<int>(get_u32(is, "n1"));
        e.shape.n2 = static_cast<int>(get_u32(is, "n2"));
        e.shape.n3 = static_cast<int>(get_u32(is, "n3"));
        const std::int64_t n = e.shape.numel();
        if (with_data) {
            e.data.resize(static_cast<std::size_t>(n));
            if (!is.read(reinterpret_cast<char*>(e.data.data()),
                         static_cast<std::streamsize>(sizeof(double) * n)))
                throw IoError("checkpoint: truncated payload for " + e.name);
        } else {
            is.seekg(static_cast<std::streamoff>(sizeof(double) * n), std::ios::cur);
            if (!is) throw IoError("checkpoint: truncated payload for " + e.name);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace

void load_checkpoint(ParamStore& store, const std::string& path) {
    for (Entry& e : read_entries(path, true)) {
        ParamTensor* p = store.find(e.name);
        if (p == nullptr) throw IoError("checkpoint: unknown parameter " + e.name);
        if (p->value.shape() != e.shape)
            throw IoError("checkpoint: shape mismatch for " + e.name + ": file " + e.shape.str() +
                          " vs model " + p->value.shape().str());
        DenseTensor v(e.shape, std::move(e.data));
        if (!v.all_finite()) throw IoError("checkpoint: non-finite values in " + e.name);
        p->value = std::move(v);
    }
}

std::vector<std::pair<std::string, Shape>> checkpoint_manifest(const std::string& path) {
    std::vector<std::pair<std::string, Shape>> out;
    for (Entry& e : read_entries(path, false)) out.emplace_back(std::move(e.name), e.shape);
    return out;
}

} // namespace cobot
