#include <fstream>

#include "barecam/binio.hpp"
#include "barecam/network.hpp"

namespace barecam::nn {

namespace {
constexpr char kMagic[4] = {'O', 'F', 'N', 'N'};
constexpr uint16_t kVersion = 1;
}  // namespace

void save_checkpoint(const Network<float>& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    bin::write_magic(os, kMagic);
    bin::write_raw<uint16_t>(os, kVersion);
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(net.input_h()));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(net.input_w()));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(net.input_c()));
    bin::write_raw<uint32_t>(os, static_cast<uint32_t>(net.layer_count()));
    for (const auto& s : net.specs()) {
        bin::write_raw<uint16_t>(os, static_cast<uint16_t>(s.kind));
        bin::write_raw<int32_t>(os, s.kernel);
        bin::write_raw<int32_t>(os, s.stride);
        bin::write_raw<int32_t>(os, s.pad);
        bin::write_raw<int32_t>(os, s.out_channels);
        bin::write_raw<int32_t>(os, s.units);
    }
    bin::write_raw<uint64_t>(os, net.init_seed());
    bin::write_raw<uint64_t>(os, static_cast<uint64_t>(net.adam_step_count()));
    for (const auto& lp : net.all_params())
        for (const auto& t : lp) {
            bin::write_raw<uint32_t>(os, static_cast<uint32_t>(t.shape.size()));
            for (int d : t.shape) bin::write_raw<uint32_t>(os, static_cast<uint32_t>(d));
            bin::write_vec(os, t.data);
        }
    for (const auto& lm : net.adam_m())
        for (const auto& t : lm) bin::write_vec(os, t.data);
    for (const auto& lv : net.adam_v())
        for (const auto& t : lv) bin::write_vec(os, t.data);
    if (!os) throw FormatError("short write: " + path);
}

Network<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    bin::expect_magic(is, kMagic, "checkpoint");
    const auto version = bin::read_raw<uint16_t>(is, "version");
    if (version != kVersion)
        throw FormatError("checkpoint version " + std::to_string(version) + " not supported");
    const int in_h = static_cast<int>(bin::read_raw<uint32_t>(is, "input h"));
    const int in_w = static_cast<int>(bin::read_raw<uint32_t>(is, "input w"));
    const int in_c = static_cast<int>(bin::read_raw<uint32_t>(is, "input c"));
    const auto n_layers = bin::read_raw<uint32_t>(is, "layer count");
    std::vector<LayerSpec> specs;
    specs.reserve(n_layers);
    for (uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec s;
        const auto kind = bin::read_raw<uint16_t>(is, "layer kind");
        if (kind < 1 || kind > 8)
            throw FormatError("checkpoint has unknown layer kind " + std::to_string(kind));
        s.kind = static_cast<LayerKind>(kind);
        s.kernel = bin::read_raw<int32_t>(is, "kernel");
        s.stride = bin::read_raw<int32_t>(is, "stride");
        s.pad = bin::read_raw<int32_t>(is, "pad");
        s.out_channels = bin::read_raw<int32_t>(is, "out channels");
        s.units = bin::read_raw<int32_t>(is, "units");
        specs.push_back(s);
    }
    Network<float> net(in_h, in_w, in_c, std::move(specs));
    net.set_init_seed(bin::read_raw<uint64_t>(is, "seed record"));
    net.set_adam_step_count(static_cast<int64_t>(bin::read_raw<uint64_t>(is, "adam step")));
    for (auto& lp : net.all_params())
        for (auto& t : lp) {
            const auto ndim = bin::read_raw<uint32_t>(is, "tensor rank");
            if (ndim != t.shape.size())
                throw FormatError("checkpoint tensor rank disagrees with layer specs");
            for (int d : t.shape) {
                const auto got = bin::read_raw<uint32_t>(is, "tensor dim");
                if (got != static_cast<uint32_t>(d))
                    throw FormatError("checkpoint tensor shape disagrees with layer specs");
            }
            bin::read_vec(is, t.data, static_cast<size_t>(t.numel()), "parameters");
        }
    for (auto& lm : net.adam_m())
        for (auto& t : lm)
            bin::read_vec(is, t.data, static_cast<size_t>(t.numel()), "adam m");
    for (auto& lv : net.adam_v())
        for (auto& t : lv)
            bin::read_vec(is, t.data, static_cast<size_t>(t.numel()), "adam v");
    return net;
}

}  // namespace barecam::nn
