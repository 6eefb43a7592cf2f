#include "admix/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace admix {

namespace {

const char* kind_name(LayerSpec::Kind k) {
    switch (k) {
        case LayerSpec::Kind::Conv: return "conv";
        case LayerSpec::Kind::Relu: return "relu";
        case LayerSpec::Kind::AvgPool: return "avgpool";
        case LayerSpec::Kind::Flatten: return "flatten";
        case LayerSpec::Kind::Dense: return "dense";
    }
    return "?";
}

LayerSpec::Kind kind_from_name(const std::string& s) {
    if (s == "conv") return LayerSpec::Kind::Conv;
    if (s == "relu") return LayerSpec::Kind::Relu;
    if (s == "avgpool") return LayerSpec::Kind::AvgPool;
    if (s == "flatten") return LayerSpec::Kind::Flatten;
    if (s == "dense") return LayerSpec::Kind::Dense;
    throw TensorError("unknown layer kind '" + s + "'");
}

}  // namespace

std::vector<std::vector<int>> ModelSpec::output_shapes() const {
    if (input_shape.size() != 3) throw TensorError("input_shape must be CHW");
    std::vector<std::vector<int>> shapes;
    std::vector<int> cur = input_shape;
    for (size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                if (cur.size() != 3)
                    throw TensorError("layer " + std::to_string(li) + ": conv needs CHW input");
                int h = (cur[1] + 2 * l.pad - l.k) / l.stride + 1;
                int w = (cur[2] + 2 * l.pad - l.k) / l.stride + 1;
                if (h < 1 || w < 1)
                    throw TensorError("layer " + std::to_string(li) + ": conv output collapses");
                cur = {l.out, h, w};
                break;
            }
            case LayerSpec::Kind::Relu:
                break;
            case LayerSpec::Kind::AvgPool:
                if (cur.size() != 3 || cur[1] % l.k || cur[2] % l.k)
                    throw TensorError("layer " + std::to_string(li) + ": pool window " +
                                      std::to_string(l.k) + " does not divide feature map");
                cur = {cur[0], cur[1] / l.k, cur[2] / l.k};
                break;
            case LayerSpec::Kind::Flatten:
                cur = {static_cast<int>(shape_numel(cur))};
                break;
            case LayerSpec::Kind::Dense:
                if (cur.size() != 1)
                    throw TensorError("layer " + std::to_string(li) + ": dense needs flat input");
                cur = {l.out};
                break;
        }
        shapes.push_back(cur);
    }
    if (shapes.empty() || shapes.back() != std::vector<int>{num_classes})
        throw TensorError("final layer must emit " + std::to_string(num_classes) + " logits");
    return shapes;
}

std::string ModelSpec::to_json() const {
    nlohmann::ordered_json j;
    j["input_shape"] = input_shape;
    j["num_classes"] = num_classes;
    j["layers"] = nlohmann::ordered_json::array();
    for (const LayerSpec& l : layers) {
        nlohmann::ordered_json lj;
        lj["type"] = kind_name(l.kind);
        if (l.kind == LayerSpec::Kind::Conv) {
            lj["out"] = l.out;
            lj["k"] = l.k;
            lj["stride"] = l.stride;
            lj["pad"] = l.pad;
        } else if (l.kind == LayerSpec::Kind::AvgPool) {
            lj["k"] = l.k;
        } else if (l.kind == LayerSpec::Kind::Dense) {
            lj["out"] = l.out;
        }
        j["layers"].push_back(lj);
    }
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelSpec s;
    s.input_shape = j.at("input_shape").get<std::vector<int>>();
    s.num_classes = j.at("num_classes").get<int>();
    for (const auto& lj : j.at("layers")) {
        LayerSpec l;
        l.kind = kind_from_name(lj.at("type").get<std::string>());
        if (l.kind == LayerSpec::Kind::Conv) {
            l.out = lj.at("out").get<int>();
            l.k = lj.at("k").get<int>();
            l.stride = lj.at("stride").get<int>();
            l.pad = lj.at("pad").get<int>();
        } else if (l.kind == LayerSpec::Kind::AvgPool) {
            l.k = lj.at("k").get<int>();
        } else if (l.kind == LayerSpec::Kind::Dense) {
            l.out = lj.at("out").get<int>();
        }
        s.layers.push_back(l);
    }
    s.output_shapes();  // validate
    return s;
}

ModelSpec ModelSpec::builtin(const std::string& name) {
    using K = LayerSpec::Kind;
    ModelSpec s;
    s.input_shape = {3, 32, 32};
    s.num_classes = 10;
    if (name == "net-a") {
        s.layers = {
            {K::Conv, 8, 3, 1, 1},  {K::Relu}, {K::AvgPool, 0, 2},
            {K::Conv, 16, 3, 1, 1}, {K::Relu}, {K::AvgPool, 0, 2},
            {K::Flatten},           {K::Dense, 10},
        };
    } else if (name == "net-b") {
        s.layers = {
            {K::Conv, 6, 5, 1, 2},  {K::Relu}, {K::AvgPool, 0, 2},
            {K::Conv, 12, 3, 1, 1}, {K::Relu}, {K::AvgPool, 0, 2},
            {K::Conv, 24, 3, 1, 1}, {K::Relu}, {K::AvgPool, 0, 2},
            {K::Flatten},           {K::Dense, 10},
        };
    } else {
        throw TensorError("unknown builtin architecture '" + name + "'");
    }
    s.output_shapes();
    return s;
}

Tensor* Weights::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* Weights::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

Weights init_weights(const ModelSpec& spec, uint64_t seed) {
    Rng rng(seed);
    auto shapes = spec.output_shapes();
    Weights w;
    std::vector<int> cur = spec.input_shape;
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        std::string prefix = "layer" + std::to_string(li);
        if (l.kind == LayerSpec::Kind::Conv) {
            int fan_in = cur[0] * l.k * l.k;
            float s = std::sqrt(1.0f / static_cast<float>(fan_in));
            Tensor kern({l.out, cur[0], l.k, l.k});
            for (auto& v : kern.data) v = rng.uniform(-s, s);
            Tensor bias({l.out});
            for (auto& v : bias.data) v = rng.uniform(-s, s);
            w.tensors.emplace_back(prefix + ".kernel", std::move(kern));
            w.tensors.emplace_back(prefix + ".bias", std::move(bias));
        } else if (l.kind == LayerSpec::Kind::Dense) {
            int fan_in = cur[0];
            float s = std::sqrt(1.0f / static_cast<float>(fan_in));
            Tensor wt({l.out, fan_in});
            for (auto& v : wt.data) v = rng.uniform(-s, s);
            Tensor bias({l.out});
            for (auto& v : bias.data) v = rng.uniform(-s, s);
            w.tensors.emplace_back(prefix + ".weight", std::move(wt));
            w.tensors.emplace_back(prefix + ".bias", std::move(bias));
        }
        cur = shapes[li];
    }
    return w;
}

NodeId build_forward(Tape& tape, const Model& model, NodeId input, bool trainable,
                     std::vector<NodeId>* weight_nodes) {
    const Tensor& xv = tape.value(input);
    if (xv.shape != model.spec.input_shape)
        throw TensorError("input shape " + xv.shape_str() + " does not match model input " +
                          Tensor(model.spec.input_shape).shape_str());
    NodeId cur = input;
    for (size_t li = 0; li < model.spec.layers.size(); ++li) {
        const LayerSpec& l = model.spec.layers[li];
        std::string prefix = "layer" + std::to_string(li);
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                const Tensor* k = model.weights.find(prefix + ".kernel");
                const Tensor* b = model.weights.find(prefix + ".bias");
                if (!k || !b) throw TensorError("missing weights for " + prefix);
                NodeId kn = tape.input(*k, trainable);
                NodeId bn = tape.input(*b, trainable);
                if (weight_nodes) {
                    weight_nodes->push_back(kn);
                    weight_nodes->push_back(bn);
                }
                cur = tape.conv2d(cur, kn, bn, l.stride, l.pad);
                break;
            }
            case LayerSpec::Kind::Relu:
                cur = tape.relu(cur);
                break;
            case LayerSpec::Kind::AvgPool:
                cur = tape.avgpool2d(cur, l.k);
                break;
            case LayerSpec::Kind::Flatten:
                cur = tape.flatten(cur);
                break;
            case LayerSpec::Kind::Dense: {
                const Tensor* wt = model.weights.find(prefix + ".weight");
                const Tensor* b = model.weights.find(prefix + ".bias");
                if (!wt || !b) throw TensorError("missing weights for " + prefix);
                NodeId wn = tape.input(*wt, trainable);
                NodeId bn = tape.input(*b, trainable);
                if (weight_nodes) {
                    weight_nodes->push_back(wn);
                    weight_nodes->push_back(bn);
                }
                cur = tape.dense(cur, wn, bn);
                break;
            }
        }
    }
    return cur;
}

Tensor forward_logits(const Model& model, const Tensor& x) {
    Tape tape;
    NodeId in = tape.input(x, false);
    NodeId logits = build_forward(tape, model, in, false);
    Tensor out = tape.value(logits);
    out.check_finite("forward_logits");
    return out;
}

int predict(const Model& model, const Tensor& x) {
    Tensor logits = forward_logits(model, x);
    int best = 0;
    for (int i = 1; i < logits.dim(0); ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

std::pair<float, Tensor> loss_input_grad(const Model& model, const Tensor& x, int y) {
    Tape tape;
    NodeId in = tape.input(x, true);
    NodeId logits = build_forward(tape, model, in, false);
    NodeId loss = tape.softmax_cross_entropy(logits, y);
    Tensor grad = std::move(tape.gradients(loss, {in})[0]);
    grad.check_finite("loss_input_grad");
    return {tape.scalar(loss), std::move(grad)};
}

// ---- checkpoint IO ----

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const char* what, std::streamoff& off) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4)
        throw TensorError(std::string("checkpoint truncated reading ") + what + " at byte offset " +
                          std::to_string(off));
    off += 4;
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw TensorError("cannot open '" + path + "' for writing");
    os.write("ADMW", 4);
    put_u32(os, 1);
    std::string spec = model.spec.to_json() + "\n";
    put_u32(os, static_cast<uint32_t>(spec.size()));
    os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
    for (const auto& [name, t] : model.weights.tensors) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(t.rank()));
        for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw TensorError("write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorError("cannot open '" + path + "'");
    std::streamoff off = 0;
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "ADMW", 4) != 0)
        throw TensorError("bad magic at byte offset 0 in '" + path + "'");
    off = 4;
    uint32_t version = get_u32(is, "version", off);
    if (version != 1)
        throw TensorError("unsupported checkpoint version " + std::to_string(version));
    uint32_t spec_len = get_u32(is, "spec length", off);
    std::string spec_text(spec_len, '\0');
    is.read(spec_text.data(), spec_len);
    if (is.gcount() != static_cast<std::streamsize>(spec_len))
        throw TensorError("checkpoint truncated in spec JSON at byte offset " +
                          std::to_string(off));
    off += spec_len;

    Model m;
    m.spec = ModelSpec::from_json(spec_text);
    while (true) {
        is.peek();
        if (is.eof()) break;
        uint32_t name_len = get_u32(is, "tensor name length", off);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (is.gcount() != static_cast<std::streamsize>(name_len))
            throw TensorError("checkpoint truncated in tensor name at byte offset " +
                              std::to_string(off));
        off += name_len;
        uint32_t rank = get_u32(is, "tensor rank", off);
        std::vector<int> dims;
        for (uint32_t i = 0; i < rank; ++i)
            dims.push_back(static_cast<int>(get_u32(is, "tensor dim", off)));
        int64_t count = shape_numel(dims);
        Tensor t(dims);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
            throw TensorError("checkpoint truncated in payload of '" + name + "': expected " +
                              std::to_string(count * sizeof(float)) + " bytes, got " +
                              std::to_string(is.gcount()) + " at byte offset " +
                              std::to_string(off));
        off += static_cast<std::streamoff>(count * sizeof(float));
        t.check_finite("load_checkpoint");
        m.weights.tensors.emplace_back(std::move(name), std::move(t));
    }

    // Shape chain validation against the spec.
    Model ref;
    ref.spec = m.spec;
    Weights expect = init_weights(m.spec, 0);
    if (expect.tensors.size() != m.weights.tensors.size())
        throw TensorError("checkpoint tensor count " + std::to_string(m.weights.tensors.size()) +
                          " does not match spec (" + std::to_string(expect.tensors.size()) + ")");
    for (const auto& [name, t] : expect.tensors) {
        const Tensor* got = m.weights.find(name);
        if (!got) throw TensorError("checkpoint missing tensor '" + name + "'");
        if (got->shape != t.shape)
            throw TensorError("checkpoint tensor '" + name + "' has shape " + got->shape_str() +
                              ", spec requires " + t.shape_str());
    }
    return m;
}

}  // namespace admix
