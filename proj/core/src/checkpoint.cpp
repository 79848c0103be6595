#include "mgcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>
#include <vector>

#ifdef MGCN_VENDORED_JSON
#include "json.hpp"
#else
#include <nlohmann/json.hpp>
#endif

#include "mgcn/errors.hpp"

namespace mgcn {

namespace {

using nlohmann::json;

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

json extent_json(Extent2 e) { return json::array({e.h, e.w}); }

json layer_json(const LayerSpec& spec);

json layers_json(const std::vector<LayerSpec>& layers) {
    json arr = json::array();
    for (const auto& l : layers) arr.push_back(layer_json(l));
    return arr;
}

json layer_json(const LayerSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["kind"] = std::string(kind_name(spec));
    std::visit(overloaded{
                   [&](const Conv2DSpec& s) {
                       j["filters"] = s.filters;
                       j["kernel"] = extent_json(s.kernel);
                       j["stride"] = extent_json(s.stride);
                       j["padding"] = std::string(to_string(s.padding));
                       j["activation"] = std::string(to_string(s.activation));
                   },
                   [&](const MaxPoolSpec& s) {
                       j["window"] = extent_json(s.window);
                       j["stride"] = extent_json(s.stride);
                       j["padding"] = std::string(to_string(s.padding));
                   },
                   [&](const AvgPoolSpec& s) {
                       j["window"] = extent_json(s.window);
                       j["stride"] = extent_json(s.stride);
                       j["padding"] = std::string(to_string(s.padding));
                   },
                   [&](const DenseSpec& s) {
                       j["units"] = s.units;
                       j["activation"] = std::string(to_string(s.activation));
                   },
                   [&](const DropoutSpec& s) { j["rate"] = s.rate; },
                   [&](const ActivationSpec& s) { j["fn"] = std::string(to_string(s.fn)); },
                   [&](const BranchSpec& s) {
                       json chains = json::array();
                       for (const auto& chain : s.chains) chains.push_back(layers_json(chain));
                       j["chains"] = std::move(chains);
                   },
                   [](const auto&) {},
               },
               spec.kind);
    return j;
}

Padding parse_padding(const std::string& s) {
    if (s == "same") return Padding::same;
    if (s == "valid") return Padding::valid;
    throw FormatError("unknown padding '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    for (Activation a : {Activation::none, Activation::relu, Activation::sigmoid}) {
        if (to_string(a) == s) return a;
    }
    throw FormatError("unknown activation '" + s + "'");
}

Extent2 parse_extent(const json& j) {
    if (!j.is_array() || j.size() != 2) throw FormatError("extent must be a two-element array");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

LayerSpec parse_layer(const json& j);

std::vector<LayerSpec> parse_layers(const json& arr) {
    if (!arr.is_array()) throw FormatError("layer list must be an array");
    std::vector<LayerSpec> out;
    for (const auto& j : arr) out.push_back(parse_layer(j));
    return out;
}

LayerSpec parse_layer(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    LayerSpec spec;
    if (kind == "conv2d") {
        spec = layer::conv2d(j.at("filters").get<std::size_t>(), parse_extent(j.at("kernel")),
                             parse_activation(j.at("activation")), parse_padding(j.at("padding")),
                             parse_extent(j.at("stride")));
    } else if (kind == "max_pool") {
        spec = layer::max_pool(parse_extent(j.at("window")), parse_extent(j.at("stride")),
                               parse_padding(j.at("padding")));
    } else if (kind == "avg_pool") {
        spec = layer::avg_pool(parse_extent(j.at("window")), parse_extent(j.at("stride")),
                               parse_padding(j.at("padding")));
    } else if (kind == "dense") {
        spec = layer::dense(j.at("units").get<std::size_t>(), parse_activation(j.at("activation")));
    } else if (kind == "flatten") {
        spec = layer::flatten();
    } else if (kind == "dropout") {
        spec = layer::dropout(j.at("rate").get<float>());
    } else if (kind == "batch_norm") {
        spec = layer::batch_norm();
    } else if (kind == "global_avg_pool") {
        spec = layer::global_avg_pool();
    } else if (kind == "activation") {
        spec = layer::activation(parse_activation(j.at("fn")));
    } else if (kind == "branch") {
        std::vector<std::vector<LayerSpec>> chains;
        for (const auto& c : j.at("chains")) chains.push_back(parse_layers(c));
        spec = layer::branch(std::move(chains));
    } else {
        throw FormatError("unknown layer kind '" + kind + "'");
    }
    spec.name = j.at("name").get<std::string>();
    validate(spec);
    return spec;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t to_u32(std::size_t v, const char* what) {
    if (v > 0xffffffffu) throw FormatError(std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }

    std::string bytes_;
    std::size_t pos_ = 0;
};

std::string layer_of(const std::string& tensor_name) {
    const auto dot = tensor_name.rfind('.');
    return dot == std::string::npos ? tensor_name : tensor_name.substr(0, dot);
}

}  // namespace

std::string architecture_descriptor(const Network& net) {
    json j;
    j["input_shape"] = net.input_shape;
    j["frozen_prefix"] = net.frozen_prefix;
    j["layers"] = layers_json(net.layers);
    return j.dump();
}

Network network_from_descriptor(const std::string& descriptor) {
    json j;
    try {
        j = json::parse(descriptor);
    } catch (const json::exception& e) {
        throw FormatError(std::string("architecture descriptor is not valid JSON: ") + e.what());
    }
    Network net;
    try {
        net.input_shape = j.at("input_shape").get<Shape>();
        net.frozen_prefix = j.at("frozen_prefix").get<std::size_t>();
        net.layers = parse_layers(j.at("layers"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed architecture descriptor: ") + e.what());
    }
    if (net.frozen_prefix > net.layers.size()) throw FormatError("frozen_prefix exceeds layer count");
    shape_trace(net);
    return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    if (!net.initialized()) throw ConfigError("cannot save an uninitialized network");
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    const std::string desc = architecture_descriptor(net);
    put_u32(out, to_u32(desc.size(), "descriptor length"));
    out += desc;
    const auto tensors = net.named_tensors(true);
    put_u32(out, to_u32(tensors.size(), "tensor count"));
    for (const auto& [name, t] : tensors) {
        put_u32(out, to_u32(name.size(), "tensor name length"));
        out += name;
        put_u32(out, to_u32(t.rank(), "rank"));
        for (std::size_t d : t.shape()) put_u32(out, to_u32(d, "dimension"));
        for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path.string());
    Reader r(std::string(std::istreambuf_iterator<char>(f), {}));

    if (r.str(4, "magic") != std::string_view(kCheckpointMagic, 4)) {
        throw FormatError(path.string() + " is not a checkpoint (bad magic bytes)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t desc_len = r.u32("descriptor length");
    Network net = network_from_descriptor(r.str(desc_len, "descriptor"));
    net.init(0);
    const auto expected = net.named_tensors(true);

    const std::uint32_t count = r.u32("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u32("tensor name length"), "tensor name");
        const std::uint32_t rank = r.u32("rank");
        Shape shape(rank);
        for (auto& d : shape) d = r.u32("dimension");
        if (i >= expected.size() || expected[i].name != name) {
            throw ShapeError("checkpoint tensor '" + name + "' does not match layer '" +
                             (i < expected.size() ? layer_of(expected[i].name) : std::string("<none>")) +
                             "' of the architecture");
        }
        Tensor t = expected[i].value;
        if (shape != t.shape()) {
            throw ShapeError("layer '" + layer_of(name) + "': stored " + name + " has shape " +
                             shape_to_string(shape) + ", architecture expects " + shape_to_string(t.shape()));
        }
        auto dst = t.mutable_data();
        for (float& v : dst) v = std::bit_cast<float>(r.u32("tensor values"));
    }
    if (count != expected.size()) {
        throw ShapeError("layer '" + layer_of(expected[count].name) + "' has no stored weights (" +
                         std::to_string(count) + " of " + std::to_string(expected.size()) + " tensors present)");
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint tensors");
    return net;
}

}  // namespace mgcn
