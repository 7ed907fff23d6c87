#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpse/nn/tensor.hpp"

namespace mpse::nn {

enum class TaskHead { bounded_mask, unbounded_mask };

struct ModelConfig {
    int channels = 64;
    int n_blocks = 4;
    int n_heads = 4;
    std::vector<int> dense_dilations{1, 2, 4, 8};
    double beta = 2.0;
    TaskHead task_head = TaskHead::bounded_mask;
    int freq_bins = 201;

    /// Width after the stride-2 encoder conv (kernel 3, padding 1): 101 for 201 bins.
    int reduced_freq_bins() const noexcept { return (freq_bins - 1) / 2 + 1; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws std::invalid_argument on an inconsistent configuration.
void validate(const ModelConfig& cfg);

std::string to_string(TaskHead head);
TaskHead parse_task_head(const std::string& s);

/// Flat key=value text.
std::string to_text(const ModelConfig& cfg);
ModelConfig parse_model_config(const std::string& text);

enum class ParamInit { uniform_fan_in, ones, zeros, prelu_slope };

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    ParamInit init = ParamInit::uniform_fan_in;
    int fan_in = 1;  ///< bound is 1/sqrt(fan_in) for uniform_fan_in
};

/// Every parameter the model graph reads for `cfg`, in a fixed order.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

/// Named parameter blobs plus the configuration they were built for.
struct WeightStore {
    ModelConfig config;
    std::map<std::string, Tensor> params;

    /// Throws WeightError(missing_parameter) if absent.
    const Tensor& at(const std::string& name) const;

    friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

/// Deterministic given seed. Uniform(-k, k) with k = 1/sqrt(fan_in) for conv,
/// linear and recurrent weights and their biases; norms start at identity,
/// PReLU slopes at 0.25, LSigmoid alpha at 1.
WeightStore init_random(const ModelConfig& cfg, std::uint64_t seed);

/// Zeroes the mask head's output conv and sets its bias (and LSigmoid alpha) so
/// the predicted mask is exactly 1 for any input, under either task head.
void set_unit_mask(WeightStore& store);

class WeightError : public std::runtime_error {
public:
    enum class Kind { io, format, checksum_mismatch, missing_parameter, extra_parameter, shape_mismatch };

    WeightError(Kind kind, std::string param, const std::string& message)
        : std::runtime_error(message), kind_(kind), param_(std::move(param)) {}

    Kind kind() const noexcept { return kind_; }
    /// Parameter path (or file path for io errors).
    const std::string& param() const noexcept { return param_; }

private:
    Kind kind_;
    std::string param_;
};

/// Checks names and shapes against param_specs(store.config).
void validate(const WeightStore& store);

/// 64-bit FNV-1a over the little-endian float32 bytes of a blob.
std::uint64_t checksum(const Tensor& t);

// On-disk layout inside `dir`:
//   config.txt    key=value model configuration
//   manifest.txt  one line per parameter: <path> f32 <shape AxBx..> <byte offset> <checksum hex>
//   weights.bin   concatenated little-endian float32 blobs
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kBlobFile = "weights.bin";

void save_weights(const WeightStore& store, const std::filesystem::path& dir);
WeightStore load_weights(const std::filesystem::path& dir);

}  // namespace mpse::nn
