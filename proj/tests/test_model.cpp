#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "frvs/checkpoint.hpp"
#include "frvs/gradcheck.hpp"
#include "frvs/model.hpp"

#include <cstdio>
#include <filesystem>

using namespace frvs;

namespace {

template <typename T>
ModelInputT<T> toy_input(int H, int W, unsigned seed, ViewpointOffset q = {1.0, -2.0}) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    ModelInputT<T> in;
    in.image = TensorT<T>({3, H, W});
    for (auto& v : in.image.data) v = static_cast<T>(dist(rng));
    in.depth = TensorT<T>({1, H, W});
    for (auto& v : in.depth.data) v = static_cast<T>(dist(rng));
    in.q = q;
    return in;
}

}  // namespace

TEST_CASE("layer specs reproduce the architecture table") {
    auto specs = layer_specs(ModelVariant::full);
    REQUIRE(specs.size() == 8);
    struct Row { const char* name; int k, in, out; };
    const Row want[] = {{"E1", 7, 3, 32},   {"E2", 5, 32, 64},  {"E3", 3, 64, 128},
                        {"E4", 1, 128, 192}, {"D1", 3, 195, 192}, {"D2", 3, 192, 128},
                        {"D3", 3, 128, 64}, {"D4", 3, 64, 2}};
    for (int i = 0; i < 8; ++i) {
        CHECK(specs[i].name == want[i].name);
        CHECK(specs[i].kernel == want[i].k);
        CHECK(specs[i].in_ch == want[i].in);
        CHECK(specs[i].out_ch == want[i].out);
        CHECK(specs[i].activation == (i == 7 ? Activation::tanh : Activation::relu));
    }
    CHECK(layer_specs(ModelVariant::no_depth)[4].in_ch == 194);
}

TEST_CASE("init_model") {
    SUBCASE("same seed is bitwise identical") {
        auto a = init_model<float>(ModelVariant::full, 42);
        auto b = init_model<float>(ModelVariant::full, 42);
        for (auto& [name, node] : a.store.params)
            CHECK(node->value.data == b.store.at(name)->value.data);
    }
    SUBCASE("E1 weight extents") {
        auto m = init_model<float>(ModelVariant::full, 1);
        CHECK(m.store.at("E1.weight")->value.shape == std::vector<int>{32, 3, 7, 7});
        for (float v : m.store.at("E1.bias")->value.data) CHECK(v == 0.0f);
    }
    SUBCASE("weight variance matches Xavier within 10%") {
        auto m = init_model<double>(ModelVariant::full, 7);
        auto& w = m.store.at("D2.weight")->value;  // 128*192*9 samples, plenty
        double mean = 0;
        for (double v : w.data) mean += v;
        mean /= w.numel();
        double var = 0;
        for (double v : w.data) var += (v - mean) * (v - mean);
        var /= w.numel();
        const double fan = 192.0 * 9 + 128.0 * 9;
        const double expect = 2.0 / fan;  // variance of U(-b,b) with b^2 = 6/fan
        CHECK(var == doctest::Approx(expect).epsilon(0.10));
    }
    SUBCASE("no_depth has exactly the D1 depth slice fewer weights") {
        auto full = init_model<float>(ModelVariant::full, 1);
        auto nd = init_model<float>(ModelVariant::no_depth, 1);
        auto count = [](const ModelParams& m) {
            std::size_t n = 0;
            for (auto& [k, v] : m.store.params) n += v->value.numel();
            return n;
        };
        CHECK(count(full) - count(nd) == 192u * 3 * 3);
    }
}

TEST_CASE("forward_flow shapes and bounds") {
    auto m = init_model<float>(ModelVariant::full, 3);
    auto in = toy_input<float>(16, 12, 5);
    auto flow = forward_flow(m, in);
    CHECK(flow->value.shape == std::vector<int>{2, 16, 12});
    for (float v : flow->value.data) CHECK(std::abs(v) <= m.max_disp);
}

TEST_CASE("zero-weight model gives zero flow and identity synthesis") {
    for (auto variant : {ModelVariant::full, ModelVariant::no_depth, ModelVariant::encdec}) {
        auto m = init_model<float>(variant, 1);
        for (auto& [name, node] : m.store.params)
            std::fill(node->value.data.begin(), node->value.data.end(), 0.0f);
        auto in = toy_input<float>(8, 8, 6);
        auto flow = predict_flow(m, in);
        for (float v : flow->value.data) CHECK(v == 0.0f);
        auto img = synthesize(m, in);
        CHECK(img->value.data == in.image.data);
    }
}

TEST_CASE("synthesized output stays in [0,1] for [0,1] input") {
    auto m = init_model<float>(ModelVariant::full, 9);
    auto in = toy_input<float>(10, 10, 10);
    auto img = synthesize(m, in);
    for (float v : img->value.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("variant mismatch rejected") {
    auto m = init_model<float>(ModelVariant::full, 1);
    auto in = toy_input<float>(8, 8, 2);
    CHECK_THROWS(forward_flow_no_depth(m, in));
    CHECK_THROWS(forward_flow_encdec(m, in));
}

TEST_CASE("encdec variant") {
    auto m = init_model<float>(ModelVariant::encdec, 4);
    auto in = toy_input<float>(16, 8, 7);
    auto flow = forward_flow_encdec(m, in);
    CHECK(flow->value.shape == std::vector<int>{2, 16, 8});
    CHECK_THROWS(forward_flow_encdec(m, toy_input<float>(10, 10, 8)));  // not divisible by 4
}

TEST_CASE("end-to-end gradient vs finite differences on a small input") {
    auto m = init_model<double>(ModelVariant::full, 11);
    auto in = toy_input<double>(8, 8, 12);
    auto target = toy_input<double>(8, 8, 13).image;
    auto build = [&] {
        auto out = synthesize(m, in);
        return mean(abs_op(sub(out, make_const(target))));
    };
    auto report = gradcheck(m.store, build, 2, 1e-5, 1e-3, 99);
    for (const auto& e : report.entries) {
        INFO(e.name, " rel err ", e.max_rel_err);
        CHECK(e.max_rel_err < 1e-3);
    }
}

TEST_CASE("forward is deterministic") {
    auto m = init_model<float>(ModelVariant::full, 20);
    auto in = toy_input<float>(12, 12, 21);
    auto a = forward_flow(m, in)->value.data;
    auto b = forward_flow(m, in)->value.data;
    CHECK(a == b);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    namespace fs = std::filesystem;
    auto path = fs::temp_directory_path() / "frvs_ckpt_test.bin";
    auto m = init_model<float>(ModelVariant::no_depth, 31, 7.5f);
    save_checkpoint(m, path.string());
    auto loaded = load_checkpoint(path.string());
    CHECK(loaded.variant == ModelVariant::no_depth);
    CHECK(loaded.max_disp == 7.5f);
    CHECK(loaded.store.size() == m.store.size());
    for (auto& [name, node] : m.store.params) {
        CHECK(loaded.store.at(name)->value.shape == node->value.shape);
        CHECK(loaded.store.at(name)->value.data == node->value.data);
    }
    // saving the loaded params reproduces the file byte for byte
    auto path2 = fs::temp_directory_path() / "frvs_ckpt_test2.bin";
    save_checkpoint(loaded, path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    fs::remove(path);
    fs::remove(path2);
}
