#include "mpse/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "mpse/audio.hpp"
#include "mpse/evaluation.hpp"
#include "mpse/metrics.hpp"
#include "mpse/nn/model.hpp"
#include "mpse/nn/weights.hpp"
#include "mpse/verify.hpp"

namespace mpse {

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level_from_env() {
    const char* v = std::getenv("MPSE_LOG");
    if (!v) return LogLevel::info;
    const std::string s(v);
    if (s == "error") return LogLevel::error;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::info;
}

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    LogLevel level;

    std::ostream* log(LogLevel at) const { return level >= at ? &err : nullptr; }
};

void info(const Context& ctx, const std::string& line) {
    if (auto* os = ctx.log(LogLevel::info)) *os << line << '\n';
}
void debug(const Context& ctx, const std::string& line) {
    if (auto* os = ctx.log(LogLevel::debug)) *os << "debug: " << line << '\n';
}

void need(const std::string& value, const std::string& flag) {
    if (value.empty()) throw UsageError(flag + " is required");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

// Config values fill options the command line left unset.
void apply_config(CLI::App& app, CLI::App& sub, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt) {
            bool known = false;
            for (CLI::App* other : app.get_subcommands({}))
                known = known || other->get_option_no_throw("--" + key) != nullptr;
            if (!known) throw UsageError("config: unknown key '" + key + "'");
            continue;
        }
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

struct StftFlags {
    int n_fft = 400;
    int win_length = 400;
    int hop_length = 100;
    double compression = 0.3;

    void attach(CLI::App& sub) {
        sub.add_option("--n-fft", n_fft, "FFT size")->capture_default_str();
        sub.add_option("--win-length", win_length, "analysis window length")->capture_default_str();
        sub.add_option("--hop-length", hop_length, "hop between frames")->capture_default_str();
        sub.add_option("--compress", compression, "magnitude compression exponent")->capture_default_str();
    }
    StftConfig config() const {
        StftConfig c;
        c.n_fft = n_fft;
        c.win_length = win_length;
        c.hop_length = hop_length;
        c.compression_factor = compression;
        validate(c);
        return c;
    }
};

nn::TaskHead head_for_task(const std::string& task) {
    if (task == "bwe") return nn::TaskHead::unbounded_mask;
    if (task == "denoise" || task == "dereverb") return nn::TaskHead::bounded_mask;
    throw UsageError("unknown task '" + task + "'");
}

nn::Model load_model(const std::string& dir, const std::string& task, const StftConfig& stft_cfg) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) throw UsageError("weight store not found: " + dir);
    for (const char* f : {nn::kConfigFile, nn::kManifestFile, nn::kBlobFile})
        if (!fs::exists(fs::path(dir) / f)) throw UsageError("weight file not found: " + (fs::path(dir) / f).string());
    nn::WeightStore store = nn::load_weights(dir);
    const nn::TaskHead want = head_for_task(task);
    if (store.config.task_head != want)
        throw UsageError("weights in " + dir + " use the " + nn::to_string(store.config.task_head) + " head but task " +
                         task + " needs " + nn::to_string(want));
    if (store.config.freq_bins != stft_cfg.bins())
        throw UsageError("weights expect " + std::to_string(store.config.freq_bins) + " frequency bins, STFT gives " +
                         std::to_string(stft_cfg.bins()));
    return nn::Model(std::move(store));
}

nn::PhaseSource parse_phase_source(const std::string& s) {
    if (s == "decoder") return nn::PhaseSource::decoder;
    if (s == "noisy") return nn::PhaseSource::noisy;
    throw UsageError("unknown phase source '" + s + "'");
}

std::string seconds_text(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", s);
    return buf;
}

Waveform synth(const std::string& kind, double seconds, std::uint64_t seed, double freq, double amplitude) {
    if (!(seconds > 0.0)) throw UsageError("--seconds must be positive");
    const auto n = static_cast<std::size_t>(std::llround(seconds * kSampleRate));
    Waveform w;
    w.samples.resize(n);
    const double fs = kSampleRate;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (kind == "tone") {
        for (std::size_t i = 0; i < n; ++i) w.samples[i] = amplitude * std::sin(two_pi * freq * static_cast<double>(i) / fs);
    } else if (kind == "sweep") {
        // linear chirp from 0 Hz to fs/2 over the clip: f(t) = (fs/2) * t / duration
        const double rate = (fs / 2.0) / seconds;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / fs;
            w.samples[i] = amplitude * std::sin(std::numbers::pi * rate * t * t);
        }
    } else if (kind == "noise") {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-amplitude, amplitude);
        for (double& s : w.samples) s = u(rng);
    } else {
        throw UsageError("unknown synth kind '" + kind + "'");
    }
    return w;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

int dispatch(int argc, const char* const* argv, const Context& ctx) {
    CLI::App app{"Magnitude and phase speech enhancement toolkit", "mpse"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "flat key=value file supplying defaults for unset flags");

    // enhance
    auto* enhance = app.add_subcommand("enhance", "enhance one WAV file");
    std::string in, out, weights, task = "denoise", phase_source = "decoder";
    StftFlags stft_flags;
    enhance->add_option("--in", in, "input WAV (16 kHz mono PCM16)");
    enhance->add_option("--out", out, "output WAV");
    enhance->add_option("--weights", weights, "weight store directory");
    enhance->add_option("--task", task, "denoise | dereverb | bwe")->capture_default_str();
    enhance->add_option("--phase-source", phase_source, "decoder | noisy")->capture_default_str();
    stft_flags.attach(*enhance);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "compare an estimate with its reference");
    std::string ref, est, report_out;
    bool csv = false;
    analyze->add_option("--ref", ref, "reference WAV");
    analyze->add_option("--est", est, "estimate WAV");
    analyze->add_flag("--csv", csv, "print CSV instead of key=value lines");
    analyze->add_option("--out", report_out, "also write the report to this file");
    StftFlags analyze_stft;
    analyze_stft.attach(*analyze);

    // verify
    auto* verify = app.add_subcommand("verify", "run a property suite");
    std::string suite;
    std::uint64_t seed = 0;
    double tol_scale = 1.0;
    int points = 100;
    verify->add_option("--suite", suite, "roundtrip | gradcheck | invariants");
    verify->add_option("--seed", seed, "generator seed")->capture_default_str();
    verify->add_option("--tol-scale", tol_scale, "multiplier applied to every tolerance")->capture_default_str();
    verify->add_option("--points", points, "random cases per check")->capture_default_str();

    // sweep-snr
    auto* sweep = app.add_subcommand("sweep-snr", "score enhancement across input SNRs");
    std::string clean, noise, grid = "-5:15:2.5", sweep_task = "denoise", sweep_weights, sweep_out;
    sweep->add_option("--clean", clean, "clean WAV");
    sweep->add_option("--noise", noise, "noise WAV (tiled or cropped to the clean length)");
    sweep->add_option("--weights", sweep_weights, "weight store; omit to score the unprocessed mixtures");
    sweep->add_option("--task", sweep_task, "denoise | dereverb | bwe")->capture_default_str();
    sweep->add_option("--grid", grid, "lo:hi:step in dB")->capture_default_str();
    sweep->add_option("--out", sweep_out, "also write the CSV to this file");
    StftFlags sweep_stft;
    sweep_stft.attach(*sweep);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "write a test signal");
    std::string kind, synth_out;
    double seconds = 1.0, freq = 440.0, amplitude = 0.5;
    std::uint64_t synth_seed = 0;
    synth_cmd->add_option("--kind", kind, "tone | sweep | noise");
    synth_cmd->add_option("--seconds", seconds, "duration")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "noise seed")->capture_default_str();
    synth_cmd->add_option("--freq", freq, "tone frequency in Hz")->capture_default_str();
    synth_cmd->add_option("--amplitude", amplitude, "peak amplitude")->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "output WAV");

    // prepare-bwe
    auto* bwe = app.add_subcommand("prepare-bwe", "make a narrowband input at the original rate");
    std::string bwe_in, bwe_out;
    int factor = 2;
    bwe->add_option("--in", bwe_in, "wideband WAV");
    bwe->add_option("--out", bwe_out, "output WAV");
    bwe->add_option("--factor", factor, "2 | 4")->capture_default_str();

    // init-weights
    auto* init = app.add_subcommand("init-weights", "write a randomly initialized weight store");
    std::string init_out, init_task = "denoise";
    std::uint64_t init_seed = 0;
    int channels = 64, blocks = 4, heads = 4;
    bool unit_mask = false;
    init->add_option("--out", init_out, "output directory");
    init->add_option("--seed", init_seed, "generator seed")->capture_default_str();
    init->add_option("--task", init_task, "denoise | dereverb | bwe")->capture_default_str();
    init->add_option("--channels", channels, "feature channels")->capture_default_str();
    init->add_option("--blocks", blocks, "TF-Transformer blocks")->capture_default_str();
    init->add_option("--heads", heads, "attention heads")->capture_default_str();
    init->add_flag("--unit-mask", unit_mask, "force the mask head to output 1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, ctx.out, ctx.err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(app, *active, read_config_file(config_path));
    debug(ctx, "subcommand " + active->get_name());

    using Clock = std::chrono::steady_clock;

    if (active == enhance) {
        need(in, "--in");
        need(out, "--out");
        need(weights, "--weights");
        const StftConfig cfg = stft_flags.config();
        const Waveform noisy = read_wav(in);
        const nn::Model model = load_model(weights, task, cfg);
        nn::ForwardOptions opts;
        opts.phase_source = parse_phase_source(phase_source);
        const auto t0 = Clock::now();
        const auto result = nn::forward(noisy, model, cfg, opts);
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        write_wav(out, result.enhanced);
        info(ctx, in + ": " + seconds_text(static_cast<double>(noisy.size()) / kSampleRate) + " s audio, " +
                      seconds_text(elapsed) + " s elapsed");
        return kExitOk;
    }
    if (active == analyze) {
        need(ref, "--ref");
        need(est, "--est");
        const PairMetrics m = analyze_pair(read_wav(ref), read_wav(est), analyze_stft.config());
        const std::string text = csv ? to_csv(m) : to_text(m);
        ctx.out << text;
        if (!report_out.empty()) write_text(report_out, text);
        return kExitOk;
    }
    if (active == verify) {
        need(suite, "--suite");
        VerifyOptions opts;
        opts.seed = seed;
        opts.tolerance_scale = tol_scale;
        opts.points = points;
        const auto t0 = Clock::now();
        const auto checks = run_suite(parse_verify_suite(suite), opts);
        bool ok = true;
        for (const auto& c : checks) {
            ok = ok && c.passed;
            ctx.out << (c.passed ? "PASS " : "FAIL ") << c.name << ": max " << format_number(c.measured, 6)
                    << " (tolerance " << format_number(c.tolerance, 6) << ")\n";
        }
        ctx.out << suite << ": " << (ok ? "all checks passed" : "FAILED") << '\n';
        info(ctx, suite + ": " + seconds_text(std::chrono::duration<double>(Clock::now() - t0).count()) + " s");
        return ok ? kExitOk : kExitCheckFailed;
    }
    if (active == sweep) {
        need(clean, "--clean");
        need(noise, "--noise");
        const StftConfig cfg = sweep_stft.config();
        const Waveform c = read_wav(clean);
        const Waveform n = read_wav(noise);
        const std::vector<double> snrs = parse_snr_grid(grid);
        Enhancer enhancer;
        std::optional<nn::Model> model;
        if (!sweep_weights.empty()) {
            model.emplace(load_model(sweep_weights, sweep_task, cfg));
            enhancer = [&](const Waveform& y) { return nn::forward(y, *model, cfg).enhanced; };
        }
        const auto rows = snr_sweep(c, n, snrs, enhancer, cfg);
        const std::string text = sweep_csv(rows);
        ctx.out << text;
        if (!sweep_out.empty()) write_text(sweep_out, text);
        return kExitOk;
    }
    if (active == synth_cmd) {
        need(kind, "--kind");
        need(synth_out, "--out");
        write_wav(synth_out, synth(kind, seconds, synth_seed, freq, amplitude));
        return kExitOk;
    }
    if (active == bwe) {
        need(bwe_in, "--in");
        need(bwe_out, "--out");
        write_wav(bwe_out, prepare_narrowband(read_wav(bwe_in), factor));
        return kExitOk;
    }
    if (active == init) {
        need(init_out, "--out");
        nn::ModelConfig cfg;
        cfg.channels = channels;
        cfg.n_blocks = blocks;
        cfg.n_heads = heads;
        cfg.task_head = head_for_task(init_task);
        nn::validate(cfg);
        nn::WeightStore store = nn::init_random(cfg, init_seed);
        if (unit_mask) nn::set_unit_mask(store);
        nn::save_weights(store, init_out);
        info(ctx, "wrote " + std::to_string(store.params.size()) + " parameters to " + init_out);
        return kExitOk;
    }
    throw UsageError("no subcommand");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"mpse"};
    for (const auto& a : args) argv.push_back(a.c_str());
    const Context ctx{out, err, log_level_from_env()};
    try {
        return dispatch(static_cast<int>(argv.size()), argv.data(), ctx);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace mpse
