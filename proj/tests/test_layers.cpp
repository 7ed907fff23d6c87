#include <doctest.h>

#include <deque>
#include <random>

#include "mpse/nn/layers.hpp"
#include "oracles.hpp"

using namespace mpse;
using namespace mpse::nn;

namespace {

// Owns parameter buffers so layer param views stay valid for a test.
class Params {
public:
    explicit Params(std::uint64_t seed) : rng_(seed) {}

    std::span<const float> random(std::size_t n, float scale = 0.5f) {
        std::uniform_real_distribution<float> u(-scale, scale);
        auto& v = store_.emplace_back(n);
        for (float& x : v) x = u(rng_);
        return v;
    }
    std::span<const float> fill(std::size_t n, float value) { return store_.emplace_back(n, value); }

    ConvParams conv(int out, int in, int kt, int kf, float scale = 0.5f) {
        return {random(static_cast<std::size_t>(out * in * kt * kf), scale), random(static_cast<std::size_t>(out)), out,
                in, kt, kf};
    }
    LinearParams linear(int out, int in) {
        return {random(static_cast<std::size_t>(out * in)), random(static_cast<std::size_t>(out)), out, in};
    }
    GruParams gru(int in, int hidden) {
        const auto h3 = static_cast<std::size_t>(3 * hidden);
        return {random(h3 * in), random(h3 * hidden), random(h3), random(h3), in, hidden};
    }
    AttentionParams attention(int dim, int heads) {
        const auto d = static_cast<std::size_t>(dim);
        return {random(3 * d * d), random(3 * d), random(d * d), random(d), dim, heads};
    }
    AffineParams affine(std::size_t n) { return {random(n, 0.3f), random(n, 0.3f)}; }
    TransformerParams transformer(int dim, int heads) {
        TransformerParams p;
        p.attn_norm = affine(static_cast<std::size_t>(dim));
        p.attn = attention(dim, heads);
        p.ffn_norm = affine(static_cast<std::size_t>(dim));
        p.gru_forward = gru(dim, dim);
        p.gru_backward = gru(dim, dim);
        p.ffn_out = linear(dim, 2 * dim);
        return p;
    }

    FeatureMap map(int b, int c, int t, int f, float scale = 1.0f) {
        FeatureMap x(b, c, t, f);
        std::uniform_real_distribution<float> u(-scale, scale);
        for (float& v : x.data) v = u(rng_);
        return x;
    }
    SequenceBatch seq(int n, int l, int d) {
        SequenceBatch s(n, l, d);
        std::uniform_real_distribution<float> u(-1.0f, 1.0f);
        for (float& v : s.data) v = u(rng_);
        return s;
    }

private:
    std::mt19937_64 rng_;
    std::deque<std::vector<float>> store_;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct nested-loop convolution in double.
std::vector<double> conv_oracle(const FeatureMap& x, const ConvParams& p, const ConvGeometry& g, int& to, int& fo) {
    to = (x.time + 2 * g.pad_t - g.dilation_t * (p.kernel_t - 1) - 1) / g.stride_t + 1;
    fo = (x.freq + 2 * g.pad_f - g.dilation_f * (p.kernel_f - 1) - 1) / g.stride_f + 1;
    std::vector<double> y(static_cast<std::size_t>(x.batch) * p.out_channels * to * fo);
    std::size_t i = 0;
    for (int b = 0; b < x.batch; ++b)
        for (int o = 0; o < p.out_channels; ++o)
            for (int t = 0; t < to; ++t)
                for (int f = 0; f < fo; ++f) {
                    double acc = p.bias.empty() ? 0.0 : p.bias[o];
                    for (int c = 0; c < p.in_channels; ++c)
                        for (int kt = 0; kt < p.kernel_t; ++kt)
                            for (int kf = 0; kf < p.kernel_f; ++kf) {
                                const int ti = t * g.stride_t - g.pad_t + kt * g.dilation_t;
                                const int fi = f * g.stride_f - g.pad_f + kf * g.dilation_f;
                                if (ti < 0 || ti >= x.time || fi < 0 || fi >= x.freq) continue;
                                acc += static_cast<double>(
                                           p.weight[((o * p.in_channels + c) * p.kernel_t + kt) * p.kernel_f + kf]) *
                                       x.at(b, c, ti, fi);
                            }
                    y[i++] = acc;
                }
    return y;
}

std::vector<double> gru_oracle(const SequenceBatch& x, const GruParams& p, int s, bool reverse) {
    const int H = p.hidden_size, I = p.input_size;
    std::vector<double> h(H, 0.0), out(static_cast<std::size_t>(x.length) * H);
    for (int step = 0; step < x.length; ++step) {
        const int l = reverse ? x.length - 1 - step : step;
        const float* xt = x.token(s, l);
        std::vector<double> gi(3 * H), gh(3 * H);
        for (int r = 0; r < 3 * H; ++r) {
            gi[r] = p.bias_ih[r];
            gh[r] = p.bias_hh[r];
            for (int k = 0; k < I; ++k) gi[r] += static_cast<double>(p.weight_ih[r * I + k]) * xt[k];
            for (int k = 0; k < H; ++k) gh[r] += static_cast<double>(p.weight_hh[r * H + k]) * h[k];
        }
        std::vector<double> next(H);
        for (int j = 0; j < H; ++j) {
            const double r = sigmoid(gi[j] + gh[j]);
            const double z = sigmoid(gi[H + j] + gh[H + j]);
            const double n = std::tanh(gi[2 * H + j] + r * gh[2 * H + j]);
            next[j] = (1.0 - z) * n + z * h[j];
        }
        h = next;
        for (int j = 0; j < H; ++j) out[static_cast<std::size_t>(l) * H + j] = h[j];
    }
    return out;
}

std::vector<double> mhsa_oracle(const SequenceBatch& x, const AttentionParams& p, int s) {
    const int D = p.dim, L = x.length, M = p.heads, hd = D / M;
    std::vector<double> q(L * D), k(L * D), v(L * D);
    for (int l = 0; l < L; ++l)
        for (int r = 0; r < 3 * D; ++r) {
            double acc = p.in_bias[r];
            for (int c = 0; c < D; ++c) acc += static_cast<double>(p.in_weight[r * D + c]) * x.token(s, l)[c];
            (r < D ? q : r < 2 * D ? k : v)[l * D + r % D] = acc;
        }
    std::vector<double> ctx(L * D, 0.0);
    for (int h = 0; h < M; ++h)
        for (int i = 0; i < L; ++i) {
            std::vector<double> sc(L);
            double mx = -1e300;
            for (int j = 0; j < L; ++j) {
                double d = 0.0;
                for (int c = 0; c < hd; ++c) d += q[i * D + h * hd + c] * k[j * D + h * hd + c];
                sc[j] = d / std::sqrt(static_cast<double>(hd));
                mx = std::max(mx, sc[j]);
            }
            double z = 0.0;
            for (double& e : sc) z += (e = std::exp(e - mx));
            for (int j = 0; j < L; ++j)
                for (int c = 0; c < hd; ++c) ctx[i * D + h * hd + c] += sc[j] / z * v[j * D + h * hd + c];
        }
    std::vector<double> out(L * D);
    for (int l = 0; l < L; ++l)
        for (int r = 0; r < D; ++r) {
            double acc = p.out_bias[r];
            for (int c = 0; c < D; ++c) acc += static_cast<double>(p.out_weight[r * D + c]) * ctx[l * D + c];
            out[l * D + r] = acc;
        }
    return out;
}

double max_diff(std::span<const float> a, std::span<const float> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

SequenceBatch add(const SequenceBatch& a, const SequenceBatch& b) {
    SequenceBatch out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

}  // namespace

TEST_CASE("conv2d output size formula") {
    CHECK(conv_out_size(201, 3, 2, 1, 1) == 101);
    CHECK(conv_out_size(201, 3, 1, 1, 1) == 201);
    CHECK(conv_out_size(32, 3, 1, 8, 8) == 32);
    Params ps(1);
    const auto y = conv2d(ps.map(1, 2, 5, 201), ps.conv(3, 2, 1, 3), ConvGeometry{1, 2, 1, 1, 0, 1});
    CHECK(y.freq == 101);
    CHECK(y.time == 5);
    CHECK(y.channels == 3);
}

TEST_CASE("conv2d with an all-ones kernel counts in-bounds taps") {
    std::vector<float> w(9, 1.0f);
    const ConvParams p{w, {}, 1, 1, 3, 3};
    const FeatureMap ones(1, 1, 5, 6, 1.0f);
    const auto y = conv2d(ones, p, ConvGeometry{1, 1, 1, 1, 1, 1});
    CHECK(y.at(0, 0, 2, 2) == 9.0f);
    CHECK(y.at(0, 0, 0, 0) == 4.0f);
    CHECK(y.at(0, 0, 4, 5) == 4.0f);
    CHECK(y.at(0, 0, 0, 3) == 6.0f);
}

TEST_CASE("1x1 identity conv leaves the input unchanged") {
    Params ps(2);
    const auto x = ps.map(2, 3, 4, 5);
    std::vector<float> w(9, 0.0f), b(3, 0.0f);
    for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
    const auto y = conv2d(x, ConvParams{w, b, 3, 3, 1, 1});
    CHECK(y.data == x.data);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Params ps(3);
    for (const ConvGeometry g : {ConvGeometry{}, ConvGeometry{1, 2, 1, 1, 0, 1}, ConvGeometry{1, 1, 4, 1, 4, 1},
                                 ConvGeometry{2, 1, 2, 1, 1, 2}}) {
        const auto x = ps.map(2, 3, 9, 11);
        const auto p = ps.conv(4, 3, 3, 3);
        int to = 0, fo = 0;
        const auto expect = conv_oracle(x, p, g, to, fo);
        const auto y = conv2d(x, p, g);
        REQUIRE(y.time == to);
        REQUIRE(y.freq == fo);
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(y.data[i] - expect[i]) < 1e-5);
    }
    CHECK_THROWS_AS(conv2d(ps.map(1, 2, 4, 4), ps.conv(1, 3, 1, 1)), std::invalid_argument);
}

TEST_CASE("instance norm") {
    std::vector<float> one(2, 1.0f), zero(2, 0.0f);
    const AffineParams unit{one, zero};
    const auto flat = instance_norm(FeatureMap(1, 2, 4, 5, 3.0f), unit);
    for (float v : flat.data) CHECK(v == 0.0f);

    Params ps(4);
    const auto x = ps.map(2, 2, 16, 21, 3.0f);
    const auto y = instance_norm(x, unit);
    for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
            double m = 0.0, v = 0.0;
            const float* d = y.channel_data(b, c);
            for (std::size_t i = 0; i < y.plane(); ++i) m += d[i];
            m /= static_cast<double>(y.plane());
            for (std::size_t i = 0; i < y.plane(); ++i) v += (d[i] - m) * (d[i] - m);
            v /= static_cast<double>(y.plane());
            CHECK(std::abs(m) < 1e-6);
            CHECK(v > 1.0 - 1e-4);
            CHECK(v < 1.0 + 1e-4);
        }

    // A slice with zero mean and variance 1 - eps is a fixed point: the
    // stabilizer exactly restores unit scale.
    FeatureMap s(1, 1, 10, 10);
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = (i % 2 ? 1.0f : -1.0f) * std::sqrt(1.0f - kNormEps);
    std::vector<float> one1(1, 1.0f), zero1(1, 0.0f);
    const auto fixed = instance_norm(s, AffineParams{one1, zero1});
    CHECK(max_diff(fixed.data, s.data) < 1e-6);

    std::vector<float> scale{2.0f, -1.0f}, shift{0.5f, 0.25f};
    const auto aff = instance_norm(x, AffineParams{scale, shift});
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < y.plane(); ++i)
            CHECK(std::abs(aff.channel_data(1, c)[i] - (scale[c] * y.channel_data(1, c)[i] + shift[c])) < 1e-5);
}

TEST_CASE("prelu") {
    FeatureMap x(1, 2, 1, 3);
    x.data = {0.0f, 2.0f, -2.0f, 0.0f, 2.0f, -2.0f};
    std::vector<float> one{0.25f}, two{0.25f, 0.5f};
    const auto a = prelu(x, one);
    CHECK(a.data == std::vector<float>{0.0f, 2.0f, -0.5f, 0.0f, 2.0f, -0.5f});
    const auto b = prelu(x, two);
    CHECK(b.data == std::vector<float>{0.0f, 2.0f, -0.5f, 0.0f, 2.0f, -1.0f});
}

TEST_CASE("learnable sigmoid") {
    std::vector<float> alpha{1.0f, 2.0f, 0.5f};
    RealGrid x(2, 3, std::vector<double>{1.0, 0.5, 2.0, 0.0, 0.0, 0.0});
    const auto y = lsigmoid(x, alpha, 2.0);
    CHECK(y(0, 0) == 1.0);
    CHECK(y(0, 1) == 1.0);
    CHECK(y(0, 2) == 1.0);
    for (std::size_t f = 0; f < 3; ++f) CHECK(y(1, f) == doctest::Approx(0.53788284273999023).epsilon(1e-15));
    RealGrid big(1, 3, 1e3);
    for (double v : lsigmoid(big, alpha, 2.0)) CHECK(v == 2.0);
    CHECK_THROWS_AS(lsigmoid(RealGrid(1, 2), alpha, 2.0), std::invalid_argument);
}

TEST_CASE("dilated densenet") {
    Params ps(5);
    const int C = 4;
    auto make_stage = [&](int in) {
        return ConvBlockParams{ps.conv(C, in, 3, 3), ps.affine(C), ps.fill(C, 0.25f)};
    };

    // single stage equals a plain conv block with padding (1, 1)
    DenseNetParams one{{make_stage(C)}, {1}};
    const auto x = ps.map(1, C, 7, 9);
    const auto y = dilated_densenet(x, one);
    const auto ref = conv_block(x, one.stages[0], ConvGeometry{1, 1, 1, 1, 1, 1});
    CHECK(max_diff(y.data, ref.data) == 0.0);

    // four stages: explicit concatenation oracle
    DenseNetParams four;
    for (int i = 0; i < 4; ++i) four.stages.push_back(make_stage(C * (i + 1)));
    four.dilations = {1, 2, 4, 8};
    const auto x4 = ps.map(2, C, 12, 6);
    FeatureMap skip = x4;
    FeatureMap out;
    for (int i = 0; i < 4; ++i) {
        const int d = four.dilations[i];
        out = conv_block(skip, four.stages[i], ConvGeometry{1, 1, d, 1, d, 1});
        FeatureMap cat(skip.batch, skip.channels + C, skip.time, skip.freq);
        for (int b = 0; b < cat.batch; ++b) {
            std::copy_n(out.channel_data(b, 0), out.plane() * C, cat.channel_data(b, 0));
            std::copy_n(skip.channel_data(b, 0), skip.plane() * skip.channels, cat.channel_data(b, C));
        }
        skip = cat;
    }
    CHECK(max_diff(dilated_densenet(x4, four).data, out.data) == 0.0);

    // zero input with zero biases stays zero
    std::vector<ConvBlockParams> zs;
    for (int i = 0; i < 4; ++i) {
        ConvBlockParams s = make_stage(C * (i + 1));
        s.conv.bias = ps.fill(C, 0.0f);
        s.norm.bias = ps.fill(C, 0.0f);
        zs.push_back(s);
    }
    const auto z = dilated_densenet(FeatureMap(1, C, 5, 5), DenseNetParams{zs, {1, 2, 4, 8}});
    for (float v : z.data) CHECK(v == 0.0f);
}

TEST_CASE("dilated densenet keeps the full-size shape") {
    Params ps(6);
    const int C = 64;
    DenseNetParams p;
    for (int i = 0; i < 4; ++i)
        p.stages.push_back(ConvBlockParams{ps.conv(C, C * (i + 1), 3, 3, 0.05f), ps.affine(C), ps.fill(C, 0.25f)});
    p.dilations = {1, 2, 4, 8};
    const auto y = dilated_densenet(ps.map(1, C, 32, 101), p);
    CHECK(y.batch == 1);
    CHECK(y.channels == 64);
    CHECK(y.time == 32);
    CHECK(y.freq == 101);
}

TEST_CASE("pixel shuffle is the stated bijection") {
    FeatureMap x(1, 6, 2, 4);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i);
    const auto y = pixel_shuffle_freq(x, 2);
    REQUIRE(y.channels == 3);
    REQUIRE(y.freq == 8);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 2; ++t)
            for (int w = 0; w < 4; ++w)
                for (int k = 0; k < 2; ++k) CHECK(y.at(0, c, t, w * 2 + k) == x.at(0, k * 3 + c, t, w));
    std::vector<float> sorted = y.data;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == static_cast<float>(i));

    const auto cropped = crop_freq(y, 5);
    CHECK(cropped.freq == 5);
    CHECK(cropped.at(0, 2, 1, 4) == y.at(0, 2, 1, 4));
    CHECK_THROWS_AS(pixel_shuffle_freq(FeatureMap(1, 5, 1, 1), 2), std::invalid_argument);
}

TEST_CASE("layer norm and linear") {
    Params ps(7);
    const auto x = ps.seq(3, 4, 8);
    std::vector<float> one(8, 1.0f), zero(8, 0.0f);
    const auto y = layer_norm(x, AffineParams{one, zero});
    for (int r = 0; r < y.rows(); ++r) {
        double m = 0.0, v = 0.0;
        for (int c = 0; c < 8; ++c) m += y.data[r * 8 + c];
        m /= 8.0;
        for (int c = 0; c < 8; ++c) v += (y.data[r * 8 + c] - m) * (y.data[r * 8 + c] - m);
        CHECK(std::abs(m) < 1e-6);
        CHECK(v / 8.0 == doctest::Approx(1.0).epsilon(1e-3));
    }

    const auto p = ps.linear(5, 8);
    const auto z = linear(x, p);
    REQUIRE(z.dim == 5);
    for (int r = 0; r < x.rows(); ++r)
        for (int o = 0; o < 5; ++o) {
            double acc = p.bias[o];
            for (int c = 0; c < 8; ++c) acc += static_cast<double>(p.weight[o * 8 + c]) * x.data[r * 8 + c];
            CHECK(std::abs(z.data[r * 5 + o] - acc) < 1e-5);
        }

    const auto rl = relu(x);
    for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(rl.data[i] == std::max(0.0f, x.data[i]));
}

TEST_CASE("GRU follows the scalar recurrence") {
    // hidden = input = 1: hand-expanded gate equations
    std::vector<float> wih{0.5f, -0.3f, 0.8f}, whh{0.2f, 0.4f, -0.6f}, bih{0.1f, 0.0f, -0.1f}, bhh{0.0f, 0.2f, 0.3f};
    const GruParams p{wih, whh, bih, bhh, 1, 1};
    SequenceBatch x(1, 3, 1);
    x.data = {1.0f, -0.5f, 0.25f};
    double h = 0.0;
    std::vector<double> expect;
    for (float xt : x.data) {
        const double r = sigmoid(0.5 * xt + 0.1 + 0.2 * h + 0.0);
        const double z = sigmoid(-0.3 * xt + 0.0 + 0.4 * h + 0.2);
        const double n = std::tanh(0.8 * xt - 0.1 + r * (-0.6 * h + 0.3));
        h = (1.0 - z) * n + z * h;
        expect.push_back(h);
    }
    const auto y = gru(x, p, false);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(y.data[l] - expect[l]) < 1e-6);
}

TEST_CASE("GRU and BiGRU match the loop oracle") {
    Params ps(8);
    const auto x = ps.seq(3, 6, 5);
    const auto f = ps.gru(5, 4), b = ps.gru(5, 4);
    const auto yf = gru(x, f, false);
    const auto yb = gru(x, b, true);
    const auto bi = bigru(x, f, b);
    REQUIRE(bi.dim == 8);
    for (int s = 0; s < 3; ++s) {
        const auto of = gru_oracle(x, f, s, false);
        const auto ob = gru_oracle(x, b, s, true);
        for (int l = 0; l < 6; ++l)
            for (int j = 0; j < 4; ++j) {
                CHECK(std::abs(yf.token(s, l)[j] - of[l * 4 + j]) < 1e-5);
                CHECK(std::abs(yb.token(s, l)[j] - ob[l * 4 + j]) < 1e-5);
                CHECK(bi.token(s, l)[j] == yf.token(s, l)[j]);
                CHECK(bi.token(s, l)[4 + j] == yb.token(s, l)[j]);
            }
    }
}

TEST_CASE("multi-head attention matches the direct oracle") {
    Params ps(9);
    const auto x = ps.seq(2, 7, 8);
    const auto p = ps.attention(8, 4);
    const auto y = mhsa(x, p);
    for (int s = 0; s < 2; ++s) {
        const auto o = mhsa_oracle(x, p, s);
        for (int l = 0; l < 7; ++l)
            for (int c = 0; c < 8; ++c) CHECK(std::abs(y.token(s, l)[c] - o[l * 8 + c]) < 1e-5);
    }
    auto bad = p;
    bad.heads = 3;
    CHECK_THROWS_AS(mhsa(x, bad), std::invalid_argument);
}

TEST_CASE("transformer layer composition and identity") {
    Params ps(10);
    const int D = 8;
    const auto x = ps.seq(3, 5, D);
    const auto p = ps.transformer(D, 2);

    const auto y = add(x, mhsa(layer_norm(x, p.attn_norm), p.attn));
    const auto expect = add(y, linear(relu(bigru(layer_norm(y, p.ffn_norm), p.gru_forward, p.gru_backward)), p.ffn_out));
    CHECK(max_diff(transformer_layer(x, p).data, expect.data) == 0.0);

    // zeroed output projections make both residual branches vanish
    auto id = p;
    id.attn.out_weight = ps.fill(D * D, 0.0f);
    id.attn.out_bias = ps.fill(D, 0.0f);
    id.ffn_out.weight = ps.fill(D * 2 * D, 0.0f);
    id.ffn_out.bias = ps.fill(D, 0.0f);
    CHECK(transformer_layer(x, id).data == x.data);
}

TEST_CASE("sequence views and the TF block") {
    Params ps(11);
    const auto x = ps.map(2, 4, 3, 5);
    for (auto axis : {SequenceAxis::time, SequenceAxis::freq}) {
        const auto s = to_sequences(x, axis);
        CHECK(s.dim == 4);
        CHECK(s.count == (axis == SequenceAxis::time ? 2 * 5 : 2 * 3));
        CHECK(from_sequences(s, axis, x).data == x.data);
    }
    const auto st = to_sequences(x, SequenceAxis::time);
    // sequence (b, f) holds x[b, :, t, f] at step t
    CHECK(st.token(1 * 5 + 2, 1)[3] == x.at(1, 3, 1, 2));
    const auto sf = to_sequences(x, SequenceAxis::freq);
    CHECK(sf.token(1 * 3 + 2, 4)[1] == x.at(1, 1, 2, 4));

    const auto tp = ps.transformer(4, 2), fp = ps.transformer(4, 2);
    const auto mid = from_sequences(transformer_layer(to_sequences(x, SequenceAxis::time), tp), SequenceAxis::time, x);
    const auto expect =
        from_sequences(transformer_layer(to_sequences(mid, SequenceAxis::freq), fp), SequenceAxis::freq, x);
    CHECK(tf_transformer_block(x, tp, fp).data == expect.data);
}
