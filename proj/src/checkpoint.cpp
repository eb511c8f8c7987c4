#include "nllab/checkpoint.hpp"

#include "nllab/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nllab {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, std::size_t& offset) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("truncated checkpoint", offset);
    offset += sizeof(T);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamTensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint32_t>(tensor->shape.size()));
        for (std::size_t d : tensor->shape) write_pod(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(tensor->values.data()),
                  static_cast<std::streamsize>(tensor->values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::pair<std::string, ParamTensor>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::size_t offset = 0;
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("bad checkpoint magic", 0);
    offset += sizeof magic;

    const auto count = read_pod<std::uint32_t>(in, offset);
    std::vector<std::pair<std::string, ParamTensor>> out;
    out.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = read_pod<std::uint32_t>(in, offset);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("truncated checkpoint name", offset);
        offset += name_len;

        const auto ndims = read_pod<std::uint32_t>(in, offset);
        std::vector<std::size_t> shape;
        std::size_t size = 1;
        for (std::uint32_t d = 0; d < ndims; ++d) {
            const auto dim = read_pod<std::uint64_t>(in, offset);
            shape.push_back(static_cast<std::size_t>(dim));
            size *= static_cast<std::size_t>(dim);
        }
        ParamTensor tensor = ParamTensor::zeros(std::move(shape));
        in.read(reinterpret_cast<char*>(tensor.values.data()),
                static_cast<std::streamsize>(size * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != size * sizeof(double))
            throw ParseError("truncated checkpoint payload", offset);
        offset += size * sizeof(double);
        out.emplace_back(std::move(name), std::move(tensor));
    }
    return out;
}

void save_mlp(const std::string& path, const Mlp& net, const std::string& prefix) {
    std::vector<std::pair<std::string, const ParamTensor*>> tensors;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        tensors.emplace_back(prefix + ".w" + std::to_string(l), &net.weight(l));
        tensors.emplace_back(prefix + ".b" + std::to_string(l), &net.bias(l));
    }
    save_checkpoint(path, tensors);
}

void load_mlp(const std::string& path, Mlp& net, const std::string& prefix) {
    const auto tensors = load_checkpoint(path);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::string wname = prefix + ".w" + std::to_string(l);
        const std::string bname = prefix + ".b" + std::to_string(l);
        bool found_w = false;
        bool found_b = false;
        for (const auto& [name, tensor] : tensors) {
            if (name == wname) {
                if (tensor.shape != net.weight(l).shape)
                    throw ParseError("checkpoint tensor shape mismatch for " + name, 0);
                net.weight(l).values = tensor.values;
                found_w = true;
            } else if (name == bname) {
                if (tensor.shape != net.bias(l).shape)
                    throw ParseError("checkpoint tensor shape mismatch for " + name, 0);
                net.bias(l).values = tensor.values;
                found_b = true;
            }
        }
        if (!found_w || !found_b)
            throw ParseError("checkpoint missing tensors for layer " + std::to_string(l), 0);
    }
}

} // namespace nllab
