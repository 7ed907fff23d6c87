#include "mpse/nn/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

namespace mpse::nn {

static_assert(std::endian::native == std::endian::little, "weight blobs are stored little-endian");

namespace {

class SpecBuilder {
public:
    std::vector<ParamSpec> specs;

    void weight(const std::string& name, std::vector<int> shape, int fan_in) {
        specs.push_back({name, std::move(shape), ParamInit::uniform_fan_in, fan_in});
    }
    void fill(const std::string& name, std::vector<int> shape, ParamInit init) {
        specs.push_back({name, std::move(shape), init, 1});
    }

    void conv(const std::string& p, int out, int in, int kt, int kf) {
        const int fan_in = in * kt * kf;
        weight(p + ".weight", {out, in, kt, kf}, fan_in);
        weight(p + ".bias", {out}, fan_in);
    }
    void affine(const std::string& p, int n) {
        fill(p + ".weight", {n}, ParamInit::ones);
        fill(p + ".bias", {n}, ParamInit::zeros);
    }
    void conv_block(const std::string& p, int out, int in, int kt, int kf) {
        conv(p + ".conv", out, in, kt, kf);
        affine(p + ".norm", out);
        fill(p + ".act.slope", {out}, ParamInit::prelu_slope);
    }
    void dense(const std::string& p, int c, const std::vector<int>& dilations) {
        for (std::size_t i = 0; i < dilations.size(); ++i)
            conv_block(p + ".layers." + std::to_string(i), c, c * static_cast<int>(i + 1), 3, 3);
    }
    void gru(const std::string& p, int in, int hidden) {
        weight(p + ".weight_ih", {3 * hidden, in}, in);
        weight(p + ".weight_hh", {3 * hidden, hidden}, hidden);
        weight(p + ".bias_ih", {3 * hidden}, in);
        weight(p + ".bias_hh", {3 * hidden}, hidden);
    }
    void transformer(const std::string& p, int c) {
        affine(p + ".attn_norm", c);
        weight(p + ".attn.in_proj.weight", {3 * c, c}, c);
        weight(p + ".attn.in_proj.bias", {3 * c}, c);
        weight(p + ".attn.out_proj.weight", {c, c}, c);
        weight(p + ".attn.out_proj.bias", {c}, c);
        affine(p + ".ffn_norm", c);
        gru(p + ".gru_fwd", c, c);
        gru(p + ".gru_bwd", c, c);
        weight(p + ".ffn_out.weight", {c, 2 * c}, 2 * c);
        weight(p + ".ffn_out.bias", {c}, 2 * c);
    }
    void upsample(const std::string& p, int c) {
        conv(p + ".conv", 2 * c, c, 1, 3);
        affine(p + ".norm", c);
        fill(p + ".act.slope", {c}, ParamInit::prelu_slope);
    }
};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightError(WeightError::Kind::io, path.string(), "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WeightError(WeightError::Kind::io, path.string(), "cannot open " + path.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw WeightError(WeightError::Kind::io, path.string(), "failed writing " + path.string());
}

std::vector<int> parse_shape(const std::string& s) {
    std::vector<int> shape;
    if (s == "scalar") return shape;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) shape.push_back(std::stoi(part));
    return shape;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stoi(part));
    return out;
}

}  // namespace

void validate(const ModelConfig& cfg) {
    if (cfg.channels < 1 || cfg.n_blocks < 0 || cfg.n_heads < 1)
        throw std::invalid_argument("model config: channels and heads must be positive");
    if (cfg.channels % cfg.n_heads != 0)
        throw std::invalid_argument("model config: channels must be divisible by n_heads");
    if (cfg.dense_dilations.empty()) throw std::invalid_argument("model config: need at least one dense stage");
    for (std::size_t i = 0; i < cfg.dense_dilations.size(); ++i) {
        if (cfg.dense_dilations[i] < 1) throw std::invalid_argument("model config: dilations must be >= 1");
        if (i && cfg.dense_dilations[i] <= cfg.dense_dilations[i - 1])
            throw std::invalid_argument("model config: dilations must be strictly increasing");
    }
    if (!(cfg.beta > 0.0)) throw std::invalid_argument("model config: beta must be positive");
    if (cfg.freq_bins < 2) throw std::invalid_argument("model config: freq_bins must be >= 2");
}

std::string to_string(TaskHead head) {
    return head == TaskHead::bounded_mask ? "bounded_mask" : "unbounded_mask";
}

TaskHead parse_task_head(const std::string& s) {
    if (s == "bounded_mask") return TaskHead::bounded_mask;
    if (s == "unbounded_mask") return TaskHead::unbounded_mask;
    throw std::invalid_argument("unknown task_head '" + s + "'");
}

std::string to_text(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "channels=" << cfg.channels << '\n';
    os << "n_blocks=" << cfg.n_blocks << '\n';
    os << "n_heads=" << cfg.n_heads << '\n';
    os << "dense_dilations=";
    for (std::size_t i = 0; i < cfg.dense_dilations.size(); ++i) os << (i ? "," : "") << cfg.dense_dilations[i];
    os << '\n';
    os << "beta=" << std::setprecision(17) << cfg.beta << '\n';
    os << "task_head=" << to_string(cfg.task_head) << '\n';
    os << "freq_bins=" << cfg.freq_bins << '\n';
    return os.str();
}

ModelConfig parse_model_config(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw WeightError(WeightError::Kind::format, kConfigFile, "model config: expected key=value, got '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        try {
            if (key == "channels") cfg.channels = std::stoi(value);
            else if (key == "n_blocks") cfg.n_blocks = std::stoi(value);
            else if (key == "n_heads") cfg.n_heads = std::stoi(value);
            else if (key == "dense_dilations") cfg.dense_dilations = parse_int_list(value);
            else if (key == "beta") cfg.beta = std::stod(value);
            else if (key == "task_head") cfg.task_head = parse_task_head(value);
            else if (key == "freq_bins") cfg.freq_bins = std::stoi(value);
            else throw std::invalid_argument("unknown key");
        } catch (const std::exception& e) {
            throw WeightError(WeightError::Kind::format, kConfigFile,
                              "model config: bad entry '" + line + "' (" + e.what() + ")");
        }
    }
    validate(cfg);
    return cfg;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    validate(cfg);
    const int c = cfg.channels;
    SpecBuilder b;
    b.conv_block("encoder.input", c, 2, 1, 3);
    b.dense("encoder.dense", c, cfg.dense_dilations);
    b.conv_block("encoder.downsample", c, c, 1, 3);
    for (int n = 0; n < cfg.n_blocks; ++n) {
        b.transformer("blocks." + std::to_string(n) + ".time", c);
        b.transformer("blocks." + std::to_string(n) + ".freq", c);
    }
    b.dense("mask_decoder.dense", c, cfg.dense_dilations);
    b.upsample("mask_decoder.upsample", c);
    b.conv("mask_decoder.output", 1, c, 1, 1);
    if (cfg.task_head == TaskHead::bounded_mask)
        b.fill("mask_decoder.lsigmoid.alpha", {cfg.freq_bins}, ParamInit::ones);
    else
        b.fill("mask_decoder.output_act.slope", {1}, ParamInit::prelu_slope);
    b.dense("phase_decoder.dense", c, cfg.dense_dilations);
    b.upsample("phase_decoder.upsample", c);
    b.conv("phase_decoder.real", 1, c, 1, 1);
    b.conv("phase_decoder.imag", 1, c, 1, 1);
    return std::move(b.specs);
}

const Tensor& WeightStore::at(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end())
        throw WeightError(WeightError::Kind::missing_parameter, name, "missing parameter " + name);
    return it->second;
}

WeightStore init_random(const ModelConfig& cfg, std::uint64_t seed) {
    WeightStore store;
    store.config = cfg;
    std::mt19937_64 rng(seed);
    for (const auto& spec : param_specs(cfg)) {
        Tensor t(spec.shape);
        switch (spec.init) {
            case ParamInit::uniform_fan_in: {
                const float k = static_cast<float>(1.0 / std::sqrt(static_cast<double>(spec.fan_in)));
                std::uniform_real_distribution<float> dist(-k, k);
                for (float& v : t.data) v = dist(rng);
                break;
            }
            case ParamInit::ones: std::fill(t.data.begin(), t.data.end(), 1.0f); break;
            case ParamInit::zeros: break;
            case ParamInit::prelu_slope: std::fill(t.data.begin(), t.data.end(), 0.25f); break;
        }
        store.params.emplace(spec.name, std::move(t));
    }
    return store;
}

void set_unit_mask(WeightStore& store) {
    auto fill = [&](const std::string& name, float v) {
        auto it = store.params.find(name);
        if (it == store.params.end())
            throw WeightError(WeightError::Kind::missing_parameter, name, "missing parameter " + name);
        std::fill(it->second.data.begin(), it->second.data.end(), v);
    };
    fill("mask_decoder.output.weight", 0.0f);
    fill("mask_decoder.output.bias", 1.0f);
    // beta / (1 + exp(1 - alpha * 1)) with alpha = 1 is beta / 2; beta = 2 gives 1
    if (store.config.task_head == TaskHead::bounded_mask) {
        if (store.config.beta != 2.0)
            throw std::invalid_argument("set_unit_mask: bounded head needs beta = 2");
        fill("mask_decoder.lsigmoid.alpha", 1.0f);
    }
}

void validate(const WeightStore& store) {
    const auto specs = param_specs(store.config);
    std::set<std::string> expected;
    for (const auto& spec : specs) {
        expected.insert(spec.name);
        const auto it = store.params.find(spec.name);
        if (it == store.params.end())
            throw WeightError(WeightError::Kind::missing_parameter, spec.name, "missing parameter " + spec.name);
        if (it->second.shape != spec.shape || it->second.data.size() != Tensor::count(spec.shape))
            throw WeightError(WeightError::Kind::shape_mismatch, spec.name,
                              "parameter " + spec.name + " has shape " + shape_string(it->second.shape) +
                                  ", expected " + shape_string(spec.shape));
    }
    for (const auto& [name, _] : store.params)
        if (!expected.contains(name))
            throw WeightError(WeightError::Kind::extra_parameter, name, "unexpected parameter " + name);
}

std::uint64_t checksum(const Tensor& t) {
    return fnv1a(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(float));
}

void save_weights(const WeightStore& store, const std::filesystem::path& dir) {
    validate(store);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw WeightError(WeightError::Kind::io, dir.string(), "cannot create " + dir.string() + ": " + ec.message());

    std::ostringstream manifest;
    manifest << "# path dtype shape offset checksum\n";
    std::vector<unsigned char> blob;
    for (const auto& spec : param_specs(store.config)) {
        const Tensor& t = store.params.at(spec.name);
        const std::size_t offset = blob.size();
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
        blob.insert(blob.end(), bytes, bytes + t.data.size() * sizeof(float));
        manifest << spec.name << " f32 " << shape_string(t.shape) << ' ' << offset << ' ' << std::hex
                 << std::setw(16) << std::setfill('0') << checksum(t) << std::dec << std::setfill(' ') << '\n';
    }
    const std::string cfg = to_text(store.config);
    const std::string man = manifest.str();
    write_file(dir / kConfigFile, cfg.data(), cfg.size());
    write_file(dir / kManifestFile, man.data(), man.size());
    write_file(dir / kBlobFile, blob.data(), blob.size());
}

WeightStore load_weights(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw WeightError(WeightError::Kind::io, dir.string(), "weight directory not found: " + dir.string());
    WeightStore store;
    store.config = parse_model_config(read_file(dir / kConfigFile));
    const std::string manifest = read_file(dir / kManifestFile);
    const std::string blob = read_file(dir / kBlobFile);

    std::map<std::string, std::vector<int>> expected;
    for (const auto& spec : param_specs(store.config)) expected.emplace(spec.name, spec.shape);

    std::istringstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string name, dtype, shape_text, checksum_text;
        std::size_t offset = 0;
        if (!(fields >> name >> dtype >> shape_text >> offset >> checksum_text))
            throw WeightError(WeightError::Kind::format, name, "malformed manifest line: '" + line + "'");
        if (dtype != "f32")
            throw WeightError(WeightError::Kind::format, name, "parameter " + name + " has unsupported dtype " + dtype);
        const auto want = expected.find(name);
        if (want == expected.end())
            throw WeightError(WeightError::Kind::extra_parameter, name, "unexpected parameter " + name);
        if (store.params.contains(name))
            throw WeightError(WeightError::Kind::format, name, "duplicate manifest entry for " + name);

        std::vector<int> shape;
        try {
            shape = parse_shape(shape_text);
        } catch (const std::exception&) {
            throw WeightError(WeightError::Kind::format, name, "bad shape '" + shape_text + "' for " + name);
        }
        if (shape != want->second)
            throw WeightError(WeightError::Kind::shape_mismatch, name,
                              "parameter " + name + " has shape " + shape_text + ", expected " +
                                  shape_string(want->second));

        Tensor t(shape);
        const std::size_t nbytes = t.data.size() * sizeof(float);
        if (offset > blob.size() || blob.size() - offset < nbytes)
            throw WeightError(WeightError::Kind::format, name, "blob for " + name + " extends past end of " + kBlobFile);
        std::memcpy(t.data.data(), blob.data() + offset, nbytes);

        std::uint64_t stored = 0;
        try {
            stored = std::stoull(checksum_text, nullptr, 16);
        } catch (const std::exception&) {
            throw WeightError(WeightError::Kind::format, name, "bad checksum field for " + name);
        }
        if (checksum(t) != stored)
            throw WeightError(WeightError::Kind::checksum_mismatch, name, "checksum mismatch in blob " + name);
        store.params.emplace(name, std::move(t));
    }
    for (const auto& [name, _] : expected)
        if (!store.params.contains(name))
            throw WeightError(WeightError::Kind::missing_parameter, name, "missing parameter " + name);
    return store;
}

}  // namespace mpse::nn
