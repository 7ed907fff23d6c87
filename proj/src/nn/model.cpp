#include "mpse/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mpse::nn {

namespace {

RealGrid channel_grid(const FeatureMap& x, int b, int c) {
    RealGrid g(static_cast<std::size_t>(x.time), static_cast<std::size_t>(x.freq));
    const float* src = x.channel_data(b, c);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = src[i];
    return g;
}

double rms_gain(const Waveform& w) {
    double energy = 0.0;
    for (double s : w.samples) energy += s * s;
    if (!(energy > 0.0)) return 1.0;
    return std::sqrt(static_cast<double>(w.samples.size()) / energy);
}

}  // namespace

Model::Model(WeightStore store) : store_(std::move(store)) { validate(store_); }

ConvParams Model::conv(const std::string& prefix) const {
    const Tensor& w = store_.at(prefix + ".weight");
    if (w.shape.size() != 4) throw std::invalid_argument(prefix + ".weight must be 4-D");
    return {w.view(), param(prefix + ".bias"), w.shape[0], w.shape[1], w.shape[2], w.shape[3]};
}

ConvBlockParams Model::conv_block(const std::string& prefix) const {
    return {conv(prefix + ".conv"), {param(prefix + ".norm.weight"), param(prefix + ".norm.bias")},
            param(prefix + ".act.slope")};
}

DenseNetParams Model::densenet(const std::string& prefix) const {
    DenseNetParams p;
    p.dilations = config().dense_dilations;
    for (std::size_t i = 0; i < p.dilations.size(); ++i)
        p.stages.push_back(conv_block(prefix + ".layers." + std::to_string(i)));
    return p;
}

TransformerParams Model::transformer(const std::string& prefix) const {
    const int c = config().channels;
    auto gru = [&](const std::string& g) {
        return GruParams{param(g + ".weight_ih"), param(g + ".weight_hh"), param(g + ".bias_ih"),
                         param(g + ".bias_hh"), c, c};
    };
    TransformerParams p;
    p.attn_norm = {param(prefix + ".attn_norm.weight"), param(prefix + ".attn_norm.bias")};
    p.attn = {param(prefix + ".attn.in_proj.weight"), param(prefix + ".attn.in_proj.bias"),
              param(prefix + ".attn.out_proj.weight"), param(prefix + ".attn.out_proj.bias"), c, config().n_heads};
    p.ffn_norm = {param(prefix + ".ffn_norm.weight"), param(prefix + ".ffn_norm.bias")};
    p.gru_forward = gru(prefix + ".gru_fwd");
    p.gru_backward = gru(prefix + ".gru_bwd");
    p.ffn_out = {param(prefix + ".ffn_out.weight"), param(prefix + ".ffn_out.bias"), c, 2 * c};
    return p;
}

FeatureMap encoder_input(std::span<const PolarFeatures> items) {
    if (items.empty()) throw std::invalid_argument("encoder_input: empty batch");
    const auto& first = items.front().mag_c;
    FeatureMap x(static_cast<int>(items.size()), 2, static_cast<int>(first.rows()), static_cast<int>(first.cols()));
    for (std::size_t b = 0; b < items.size(); ++b) {
        require_same_shape(first, items[b].mag_c, "encoder_input");
        require_same_shape(first, items[b].phase, "encoder_input");
        float* mag = x.channel_data(static_cast<int>(b), 0);
        float* pha = x.channel_data(static_cast<int>(b), 1);
        for (std::size_t i = 0; i < first.size(); ++i) {
            mag[i] = static_cast<float>(items[b].mag_c[i]);
            pha[i] = static_cast<float>(items[b].phase[i]);
        }
    }
    return x;
}

FeatureMap encoder(const FeatureMap& input, const Model& model) {
    const auto& cfg = model.config();
    if (input.channels != 2) throw std::invalid_argument("encoder: input must have 2 channels");
    if (input.freq != cfg.freq_bins)
        throw std::invalid_argument("encoder: input has " + std::to_string(input.freq) + " bins, model expects " +
                                    std::to_string(cfg.freq_bins));
    ConvGeometry same_f;
    same_f.pad_f = 1;
    FeatureMap x = conv_block(input, model.conv_block("encoder.input"), same_f);
    x = dilated_densenet(x, model.densenet("encoder.dense"));
    ConvGeometry halve = same_f;
    halve.stride_f = 2;
    return conv_block(x, model.conv_block("encoder.downsample"), halve);
}

FeatureMap decoder_trunk(const FeatureMap& features, const Model& model, const std::string& prefix) {
    const FeatureMap d = dilated_densenet(features, model.densenet(prefix + ".dense"));
    ConvGeometry same_f;
    same_f.pad_f = 1;
    const FeatureMap up = conv2d(d, model.conv(prefix + ".upsample.conv"), same_f);
    const FeatureMap wide = crop_freq(pixel_shuffle_freq(up, 2), model.config().freq_bins);
    const AffineParams norm{model.param(prefix + ".upsample.norm.weight"), model.param(prefix + ".upsample.norm.bias")};
    return prelu(instance_norm(wide, norm), model.param(prefix + ".upsample.act.slope"));
}

MaskOutput mask_decoder(const FeatureMap& features, std::span<const MagnitudeSpectrum> noisy_mag_c,
                        const Model& model) {
    if (noisy_mag_c.size() != static_cast<std::size_t>(features.batch))
        throw std::invalid_argument("mask_decoder: one noisy magnitude per batch item required");
    const auto& cfg = model.config();
    const FeatureMap logits = conv2d(decoder_trunk(features, model, "mask_decoder"), model.conv("mask_decoder.output"));

    MaskOutput out;
    for (int b = 0; b < features.batch; ++b) {
        const RealGrid x = channel_grid(logits, b, 0);
        RealGrid mask;
        if (cfg.task_head == TaskHead::bounded_mask) {
            mask = lsigmoid(x, model.param("mask_decoder.lsigmoid.alpha"), cfg.beta);
        } else {
            const double slope = model.param("mask_decoder.output_act.slope")[0];
            mask = x;
            for (double& v : mask)
                if (v < 0.0) v *= slope;
        }
        const auto& noisy = noisy_mag_c[static_cast<std::size_t>(b)];
        require_same_shape(mask, noisy, "mask_decoder");
        MagnitudeSpectrum est(mask.rows(), mask.cols());
        for (std::size_t i = 0; i < est.size(); ++i) est[i] = mask[i] * noisy[i];
        out.mask.push_back(std::move(mask));
        out.mag_c.push_back(std::move(est));
    }
    return out;
}

double parallel_phase(double real, double imag) noexcept {
    const double a = std::atan2(imag, real);
    return a == -std::numbers::pi ? std::numbers::pi : a;
}

std::vector<PhaseSpectrum> phase_decoder(const FeatureMap& features, const Model& model) {
    const FeatureMap trunk = decoder_trunk(features, model, "phase_decoder");
    const FeatureMap re = conv2d(trunk, model.conv("phase_decoder.real"));
    const FeatureMap im = conv2d(trunk, model.conv("phase_decoder.imag"));
    std::vector<PhaseSpectrum> out;
    for (int b = 0; b < features.batch; ++b) {
        PhaseSpectrum p(static_cast<std::size_t>(re.time), static_cast<std::size_t>(re.freq));
        const float* r = re.channel_data(b, 0);
        const float* i = im.channel_data(b, 0);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = parallel_phase(r[k], i[k]);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<NetworkOutput> run_network(std::span<const PolarFeatures> items, const Model& model) {
    FeatureMap x = encoder(encoder_input(items), model);
    for (int n = 0; n < model.config().n_blocks; ++n) {
        const std::string p = "blocks." + std::to_string(n);
        x = tf_transformer_block(x, model.transformer(p + ".time"), model.transformer(p + ".freq"));
    }
    std::vector<MagnitudeSpectrum> noisy;
    for (const auto& it : items) noisy.push_back(it.mag_c);
    MaskOutput mag = mask_decoder(x, noisy, model);
    std::vector<PhaseSpectrum> phase = phase_decoder(x, model);

    std::vector<NetworkOutput> out(items.size());
    for (std::size_t b = 0; b < items.size(); ++b)
        out[b] = {std::move(mag.mask[b]), std::move(mag.mag_c[b]), std::move(phase[b])};
    return out;
}

ForwardResult forward(const Waveform& noisy, const Model& model, const StftConfig& stft_cfg,
                      const ForwardOptions& options) {
    return std::move(forward_batch(std::span<const Waveform>(&noisy, 1), model, stft_cfg, options).front());
}

std::vector<ForwardResult> forward_batch(std::span<const Waveform> noisy, const Model& model,
                                         const StftConfig& stft_cfg, const ForwardOptions& options) {
    if (noisy.empty()) throw std::invalid_argument("forward: empty batch");
    validate(stft_cfg);
    if (stft_cfg.bins() != model.config().freq_bins)
        throw std::invalid_argument("forward: STFT gives " + std::to_string(stft_cfg.bins()) +
                                    " bins, model expects " + std::to_string(model.config().freq_bins));
    const std::size_t length = noisy.front().size();
    const double c = stft_cfg.compression_factor;

    std::vector<double> gains;
    std::vector<PolarFeatures> features;
    for (const auto& w : noisy) {
        validate(w);
        if (w.size() != length) throw std::invalid_argument("forward: batch items must have equal length");
        const double g = rms_gain(w);
        Waveform scaled = w;
        for (double& s : scaled.samples) s *= g;
        auto [mag, phase] = mag_phase(stft(scaled, stft_cfg));
        features.push_back({compress(mag, c), std::move(phase)});
        gains.push_back(g);
    }

    std::vector<NetworkOutput> net = run_network(features, model);

    std::vector<ForwardResult> out;
    for (std::size_t b = 0; b < noisy.size(); ++b) {
        ForwardResult r;
        r.phase = options.phase_source == PhaseSource::noisy ? features[b].phase : std::move(net[b].phase);
        // an unbounded mask may go negative; no magnitude below zero
        MagnitudeSpectrum mag_c = std::move(net[b].mag_c);
        for (double& v : mag_c) v = std::max(v, 0.0);
        r.mag = decompress(mag_c, c);
        r.mask = std::move(net[b].mask);
        r.enhanced = istft(polar(r.mag, r.phase), stft_cfg, length);
        r.enhanced.sample_rate = noisy[b].sample_rate;
        for (double& s : r.enhanced.samples) s /= gains[b];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mpse::nn
