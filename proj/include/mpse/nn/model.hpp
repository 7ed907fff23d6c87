#pragma once

#include <span>
#include <string>
#include <vector>

#include "mpse/audio.hpp"
#include "mpse/grid.hpp"
#include "mpse/nn/layers.hpp"
#include "mpse/nn/weights.hpp"
#include "mpse/spectral.hpp"

namespace mpse::nn {

/// Validated, immutable weights plus typed accessors for each sub-graph.
/// Safe to share across threads.
class Model {
public:
    explicit Model(WeightStore store);

    const ModelConfig& config() const noexcept { return store_.config; }
    const WeightStore& weights() const noexcept { return store_; }

    std::span<const float> param(const std::string& name) const { return store_.at(name).view(); }
    ConvParams conv(const std::string& prefix) const;
    ConvBlockParams conv_block(const std::string& prefix) const;
    DenseNetParams densenet(const std::string& prefix) const;
    TransformerParams transformer(const std::string& prefix) const;

private:
    WeightStore store_;
};

/// Compressed magnitude and wrapped phase of one utterance.
struct PolarFeatures {
    MagnitudeSpectrum mag_c;
    PhaseSpectrum phase;
};

/// Stacks per-utterance features into the (B, 2, T, F) network input:
/// channel 0 compressed magnitude, channel 1 phase.
FeatureMap encoder_input(std::span<const PolarFeatures> items);

/// conv block (2 -> C) -> dilated DenseNet -> stride-2 conv block; (B,2,T,F) -> (B,C,T,F').
FeatureMap encoder(const FeatureMap& input, const Model& model);

/// Dilated DenseNet -> sub-pixel upsample to 2F' -> crop to F -> norm + PReLU.
FeatureMap decoder_trunk(const FeatureMap& features, const Model& model, const std::string& prefix);

struct MaskOutput {
    std::vector<RealGrid> mask;               ///< per item, T x F
    std::vector<MagnitudeSpectrum> mag_c;     ///< mask * noisy compressed magnitude
};

MaskOutput mask_decoder(const FeatureMap& features, std::span<const MagnitudeSpectrum> noisy_mag_c,
                        const Model& model);

/// atan2(imag, real) mapped into (-pi, pi].
double parallel_phase(double real, double imag) noexcept;

std::vector<PhaseSpectrum> phase_decoder(const FeatureMap& features, const Model& model);

struct NetworkOutput {
    RealGrid mask;
    MagnitudeSpectrum mag_c;
    PhaseSpectrum phase;
};

/// Encoder, TF-Transformer stack and both decoders for a batch of equal-shape inputs.
std::vector<NetworkOutput> run_network(std::span<const PolarFeatures> items, const Model& model);

enum class PhaseSource {
    decoder,  ///< phase predicted by the phase decoder
    noisy,    ///< magnitude-only enhancement: keep the input phase
};

struct ForwardOptions {
    PhaseSource phase_source = PhaseSource::decoder;
};

struct ForwardResult {
    Waveform enhanced;
    MagnitudeSpectrum mag;  ///< decompressed enhanced magnitude
    PhaseSpectrum phase;
    RealGrid mask;
};

/// STFT -> compress -> network -> decompress -> iSTFT, at the input length.
/// The waveform is scaled to unit RMS before analysis and rescaled after synthesis.
ForwardResult forward(const Waveform& noisy, const Model& model, const StftConfig& stft_cfg,
                      const ForwardOptions& options = {});

/// Batched forward over equal-length waveforms.
std::vector<ForwardResult> forward_batch(std::span<const Waveform> noisy, const Model& model,
                                         const StftConfig& stft_cfg, const ForwardOptions& options = {});

}  // namespace mpse::nn
