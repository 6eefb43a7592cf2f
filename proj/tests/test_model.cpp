#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "admix/model.hpp"
#include "admix/train.hpp"

using namespace admix;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Model small_model(uint64_t seed) {
    using K = LayerSpec::Kind;
    Model m;
    m.spec.input_shape = {3, 8, 8};
    m.spec.num_classes = 4;
    m.spec.layers = {{K::Conv, 4, 3, 1, 1}, {K::Relu}, {K::AvgPool, 0, 2},
                     {K::Flatten},          {K::Dense, 4}};
    m.weights = init_weights(m.spec, seed);
    return m;
}

Tensor fixed_input(std::vector<int> shape) {
    Tensor x(std::move(shape));
    for (int64_t i = 0; i < x.numel(); ++i)
        x[i] = static_cast<float>((i * 37 % 101)) / 101.0f;
    return x;
}

}  // namespace

TEST_CASE("model spec json round trip and validation") {
    ModelSpec a = ModelSpec::builtin("net-a");
    ModelSpec b = ModelSpec::from_json(a.to_json());
    CHECK(a.to_json() == b.to_json());

    ModelSpec bad = a;
    bad.num_classes = 7;  // dense still emits 10
    CHECK_THROWS_AS(bad.output_shapes(), TensorError);
    CHECK_THROWS_AS(ModelSpec::builtin("net-z"), TensorError);
}

TEST_CASE("zero weights give all-bias logits") {
    Model m = small_model(0);
    for (auto& [name, t] : m.weights.tensors)
        if (name.find("bias") == std::string::npos)
            for (auto& v : t.data) v = 0.0f;
    Tensor* bias = m.weights.find("layer4.bias");
    REQUIRE(bias != nullptr);
    Tensor logits = forward_logits(m, fixed_input({3, 8, 8}));
    CHECK(max_abs_diff(logits, *bias) == 0.0f);
}

TEST_CASE("forward is bit-deterministic") {
    Model m = small_model(5);
    Tensor x = fixed_input({3, 8, 8});
    CHECK(max_abs_diff(forward_logits(m, x), forward_logits(m, x)) == 0.0f);
    CHECK_THROWS_AS(forward_logits(m, Tensor::zeros({3, 4, 4})), TensorError);
}

TEST_CASE("argmax is invariant under a constant logit shift") {
    Model m = small_model(12);
    Tensor x = fixed_input({3, 8, 8});
    int before = predict(m, x);
    Tensor* bias = m.weights.find("layer4.bias");
    for (auto& v : bias->data) v += 3.5f;
    CHECK(predict(m, x) == before);
}

TEST_CASE("checkpoint save-load-save round trips bit-exactly") {
    Model m = small_model(9);
    const char* p1 = "ckpt_rt_1.bin";
    const char* p2 = "ckpt_rt_2.bin";
    save_checkpoint(m, p1);
    Model loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(max_abs_diff(forward_logits(m, fixed_input({3, 8, 8})),
                       forward_logits(loaded, fixed_input({3, 8, 8}))) == 0.0f);
    std::remove(p1);
    std::remove(p2);
}

TEST_CASE("checkpoint corruption is reported with context") {
    Model m = small_model(2);
    const char* path = "ckpt_bad.bin";
    save_checkpoint(m, path);
    std::string bytes = slurp(path);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    spit(path, bad_magic);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("bad magic"), TensorError);

    std::string truncated = bytes.substr(0, bytes.size() - 10);
    spit(path, truncated);
    try {
        load_checkpoint(path);
        FAIL("expected truncation error");
    } catch (const TensorError& e) {
        std::string msg = e.what();
        CHECK(msg.find("truncated") != std::string::npos);
        CHECK(msg.find("expected") != std::string::npos);
    }
    std::remove(path);
}

TEST_CASE("training: lr=0 no-op, seed determinism, empty-set error") {
    Model m = small_model(3);
    Dataset ds;
    ds.channels = 3;
    ds.height = 8;
    ds.width = 8;
    for (int i = 0; i < 8; ++i) {
        Tensor img = fixed_input({3, 8, 8});
        img[0] = static_cast<float>(i) / 8.0f;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(i % 4);
    }

    Model frozen = m;
    TrainOptions zero_lr{2, 0.0f, 4, 77};
    train(frozen, ds, zero_lr);
    for (size_t i = 0; i < m.weights.tensors.size(); ++i)
        CHECK(max_abs_diff(frozen.weights.tensors[i].second, m.weights.tensors[i].second) == 0.0f);

    Model a = m, b = m;
    TrainOptions opt{3, 0.1f, 4, 123};
    train(a, ds, opt);
    train(b, ds, opt);
    for (size_t i = 0; i < a.weights.tensors.size(); ++i)
        CHECK(max_abs_diff(a.weights.tensors[i].second, b.weights.tensors[i].second) == 0.0f);

    Dataset empty;
    CHECK_THROWS_AS(train(a, empty, opt), TensorError);
    Dataset bad = ds;
    bad.labels[0] = 9;
    CHECK_THROWS_AS(train(a, bad, opt), TensorError);
}

TEST_CASE("golden checkpoint logits") {
    // Frozen at checkpoint-creation time: net init seed 424242, fixed input.
    Model m = small_model(424242);
    Tensor logits = forward_logits(m, fixed_input({3, 8, 8}));
    const float expected[4] = {0.0731960982f, 0.145975471f, 0.00170392625f, 0.0945724994f};
    for (int i = 0; i < 4; ++i) CHECK(logits[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}
