#include "uvmap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace uvmap {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'U', 'V', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<const ParamTensor*>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(tensors.size()));
    for (const ParamTensor* t : tensors) {
        write_pod(out, static_cast<std::uint32_t>(t->name.size()));
        out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
        write_pod(out, static_cast<std::uint64_t>(t->data.rows()));
        write_pod(out, static_cast<std::uint64_t>(t->data.cols()));
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) throw ArgumentError("save_checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<ParamTensor*>& tensors) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": not a checkpoint file (bad magic)");
    std::uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " +
                          std::to_string(version));
    std::uint64_t count = 0;
    read_pod(in, count, path);

    std::map<std::string, Matrix> loaded;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t name_len = 0;
        read_pod(in, name_len, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint64_t rows = 0, cols = 0;
        read_pod(in, rows, path);
        read_pod(in, cols, path);
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in) throw FormatError(path + ": truncated checkpoint");
        loaded.emplace(std::move(name), std::move(m));
    }

    for (ParamTensor* t : tensors) {
        auto it = loaded.find(t->name);
        if (it == loaded.end())
            throw FormatError(path + ": missing tensor \"" + t->name + "\"");
        if (it->second.rows() != t->data.rows() || it->second.cols() != t->data.cols())
            throw FormatError(path + ": shape mismatch for tensor \"" + t->name + "\"");
        t->data = it->second;
        t->zero_grad();
    }
}

void save_checkpoint_manifest(
    const std::string& path,
    const std::map<std::string, std::vector<std::size_t>>& channels,
    std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    for (const auto& [name, chan] : channels) j["channels"][name] = chan;
    std::ofstream out(path);
    if (!out) throw ArgumentError("save_checkpoint_manifest: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace uvmap
