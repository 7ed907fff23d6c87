#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mpse/cli.hpp"
#include "mpse/evaluation.hpp"
#include "mpse/metrics.hpp"
#include "oracles.hpp"

using namespace mpse;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string bytes_of(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::string> small_model_flags() { return {"--channels", "8", "--blocks", "1", "--heads", "2"}; }

}  // namespace

TEST_CASE("synth fixtures") {
    oracle::TempDir dir("synth");
    const auto tone = (dir / "tone.wav").string();
    REQUIRE(cli({"synth", "--kind", "tone", "--seconds", "1", "--out", tone}).code == 0);
    const auto t = read_wav(tone);
    CHECK(t.size() == 16000);
    CHECK(t.samples[10] == doctest::Approx(0.5 * std::sin(2.0 * oracle::kPi * 440.0 * 10 / 16000.0)).epsilon(1e-4));

    const auto n1 = (dir / "n1.wav").string(), n2 = (dir / "n2.wav").string(), n3 = (dir / "n3.wav").string();
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "0.5", "--seed", "7", "--out", n1}).code == 0);
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "0.5", "--seed", "7", "--out", n2}).code == 0);
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "0.5", "--seed", "8", "--out", n3}).code == 0);
    CHECK(bytes_of(n1) == bytes_of(n2));
    CHECK(bytes_of(n1) != bytes_of(n3));

    // the chirp's spectral peak follows f(t) = 8000 * t / duration
    const auto sw = (dir / "sweep.wav").string();
    REQUIRE(cli({"synth", "--kind", "sweep", "--seconds", "2", "--out", sw}).code == 0);
    const auto s = read_wav(sw);
    const auto [mag, phase] = mag_phase(stft(s, StftConfig{}));
    for (std::size_t frame = 10; frame + 10 < mag.rows(); frame += 20) {
        const double seconds = static_cast<double>(frame) * 100.0 / 16000.0;
        const double expect_bin = 8000.0 * seconds / 2.0 / 40.0;
        std::size_t peak = 0;
        for (std::size_t f = 0; f < mag.cols(); ++f)
            if (mag(frame, f) > mag(frame, peak)) peak = f;
        CHECK(std::abs(static_cast<double>(peak) - expect_bin) <= 1.0);
    }

    CHECK(cli({"synth", "--kind", "tone", "--seconds", "0", "--out", tone}).code == 2);
    CHECK(cli({"synth", "--kind", "square", "--out", tone}).code == 2);
}

TEST_CASE("prepare-bwe keeps length") {
    oracle::TempDir dir("bwe");
    const auto in = (dir / "in.wav").string(), out = (dir / "out.wav").string();
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "0.3", "--out", in}).code == 0);
    CHECK(cli({"prepare-bwe", "--in", in, "--out", out, "--factor", "4"}).code == 0);
    CHECK(read_wav(out).size() == read_wav(in).size());
    CHECK(cli({"prepare-bwe", "--in", in, "--out", out, "--factor", "3"}).code == 2);
}

TEST_CASE("enhance") {
    oracle::TempDir dir("enhance");
    const auto in = (dir / "in.wav").string(), out = (dir / "out.wav").string();
    const auto weights = (dir / "w").string(), unit = (dir / "unit").string();
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "2", "--seed", "3", "--amplitude", "0.3", "--out", in}).code == 0);

    auto init = std::vector<std::string>{"init-weights", "--out", weights, "--seed", "1"};
    for (const auto& f : small_model_flags()) init.push_back(f);
    REQUIRE(cli(init).code == 0);

    const auto r = cli({"enhance", "--in", in, "--out", out, "--weights", weights});
    CHECK(r.code == 0);
    CHECK(r.err.find("s elapsed") != std::string::npos);
    const auto y = read_wav(in), e = read_wav(out);
    CHECK(e.size() == y.size());
    for (double v : e.samples) CHECK(std::isfinite(v));

    // forged unit mask with the input phase gives back the input up to PCM rounding
    init = {"init-weights", "--out", unit, "--unit-mask"};
    for (const auto& f : small_model_flags()) init.push_back(f);
    REQUIRE(cli(init).code == 0);
    REQUIRE(cli({"enhance", "--in", in, "--out", out, "--weights", unit, "--phase-source", "noisy"}).code == 0);
    const auto id = read_wav(out);
    const auto ref = istft(stft(y, StftConfig{}), StftConfig{}, y.size());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(id.samples[i] - ref.samples[i]) <= 1.0 / 32768.0);

    // task must match the stored head
    CHECK(cli({"enhance", "--in", in, "--out", out, "--weights", weights, "--task", "bwe"}).code == 2);

    const auto missing = (dir / "absent").string();
    const auto m = cli({"enhance", "--in", in, "--out", out, "--weights", missing});
    CHECK(m.code == 2);
    CHECK(m.err.find(missing) != std::string::npos);

    std::filesystem::remove(std::filesystem::path(weights) / "weights.bin");
    const auto gone = cli({"enhance", "--in", in, "--out", out, "--weights", weights});
    CHECK(gone.code == 2);
    CHECK(gone.err.find("weights.bin") != std::string::npos);

    // a malformed WAV reports the offending field
    {
        std::ofstream f(dir / "bad.wav", std::ios::binary);
        f << "RIFX0000WAVE";
    }
    const auto bad = cli({"enhance", "--in", (dir / "bad.wav").string(), "--out", out, "--weights", unit});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("RIFF") != std::string::npos);

    CHECK(cli({"enhance", "--in", in, "--out", out}).code == 2);
}

TEST_CASE("analyze") {
    oracle::TempDir dir("analyze");
    const auto a = (dir / "a.wav").string(), n = (dir / "n.wav").string(), mix = (dir / "mix.wav").string();
    REQUIRE(cli({"synth", "--kind", "sweep", "--seconds", "1", "--out", a}).code == 0);
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "1", "--seed", "4", "--out", n}).code == 0);

    const auto same = cli({"analyze", "--ref", a, "--est", a});
    REQUIRE(same.code == 0);
    CHECK(same.out.find("pd_deg=0\n") != std::string::npos);
    CHECK(same.out.find("lsd_db=0\n") != std::string::npos);
    CHECK(same.out.find("si_sdr_db=inf\n") != std::string::npos);
    // compression followed by decompression is exact only up to roundoff
    CHECK(std::stod(same.out.substr(same.out.find("total=") + 6)) < 1e-20);

    write_wav(mix, mix_at_snr(read_wav(a), read_wav(n), 0.0));
    const auto noisy = cli({"analyze", "--ref", a, "--est", mix});
    REQUIRE(noisy.code == 0);
    // bit-exact agreement with the library call
    CHECK(noisy.out == to_text(analyze_pair(read_wav(a), read_wav(mix), StftConfig{})));
    const auto pd = std::stod(noisy.out.substr(noisy.out.find("pd_deg=") + 7));
    CHECK(pd > 0.0);

    const auto report = (dir / "report.csv").string();
    const auto csv = cli({"analyze", "--ref", a, "--est", mix, "--csv", "--out", report});
    CHECK(csv.code == 0);
    CHECK(csv.out.rfind("pd_deg,lsd_db,si_sdr_db,", 0) == 0);
    CHECK(bytes_of(report) == csv.out);

    const auto shorter = (dir / "short.wav").string();
    REQUIRE(cli({"synth", "--kind", "tone", "--seconds", "0.5", "--out", shorter}).code == 0);
    const auto mismatch = cli({"analyze", "--ref", a, "--est", shorter});
    CHECK(mismatch.code == 2);
    CHECK(mismatch.err.find("length mismatch") != std::string::npos);
}

TEST_CASE("verify suites") {
    const auto rt = cli({"verify", "--suite", "roundtrip"});
    CHECK(rt.code == 0);
    CHECK(rt.out.find("PASS stft/istft relative L2 error") != std::string::npos);
    CHECK(rt.out.find("all checks passed") != std::string::npos);

    const auto gc = cli({"verify", "--suite", "gradcheck", "--seed", "3"});
    CHECK(gc.code == 0);
    CHECK(gc.out.find("FAIL") == std::string::npos);

    CHECK(cli({"verify", "--suite", "invariants", "--points", "20"}).code == 0);

    const auto strict = cli({"verify", "--suite", "roundtrip", "--points", "3", "--tol-scale", "0"});
    CHECK(strict.code == 1);
    CHECK(strict.out.find("FAIL") != std::string::npos);

    CHECK(cli({"verify", "--suite", "everything"}).code == 2);
}

TEST_CASE("sweep-snr") {
    oracle::TempDir dir("sweep");
    const auto c = (dir / "c.wav").string(), n = (dir / "n.wav").string(), w = (dir / "w").string();
    REQUIRE(cli({"synth", "--kind", "sweep", "--seconds", "1", "--out", c}).code == 0);
    REQUIRE(cli({"synth", "--kind", "noise", "--seconds", "0.7", "--seed", "2", "--out", n}).code == 0);

    const auto base = cli({"sweep-snr", "--clean", c, "--noise", n});
    REQUIRE(base.code == 0);
    std::istringstream lines(base.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "snr_db,pd_deg,lsd_db,si_sdr_db");
    std::vector<double> sdr;
    while (std::getline(lines, line)) sdr.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    REQUIRE(sdr.size() == 9);
    for (std::size_t i = 1; i < sdr.size(); ++i) CHECK(sdr[i] > sdr[i - 1]);

    auto init = std::vector<std::string>{"init-weights", "--out", w};
    for (const auto& f : small_model_flags()) init.push_back(f);
    REQUIRE(cli(init).code == 0);
    const auto enhanced = cli({"sweep-snr", "--clean", c, "--noise", n, "--weights", w, "--grid", "0:10:5"});
    CHECK(enhanced.code == 0);
    CHECK(std::count(enhanced.out.begin(), enhanced.out.end(), '\n') == 4);

    CHECK(cli({"sweep-snr", "--clean", c, "--noise", n, "--grid", "0:10"}).code == 2);
}

TEST_CASE("config file fills unset flags and flags win") {
    oracle::TempDir dir("config");
    const auto cfg = (dir / "run.cfg").string();
    const auto out = (dir / "a.wav").string(), other = (dir / "b.wav").string();
    {
        std::ofstream f(cfg);
        f << "# fixture settings\nkind = tone\nseconds=0.25\nout=" << out << "\n";
    }
    REQUIRE(cli({"--config", cfg, "synth"}).code == 0);
    CHECK(read_wav(out).size() == 4000);
    REQUIRE(cli({"--config", cfg, "synth", "--seconds", "0.5", "--out", other}).code == 0);
    CHECK(read_wav(other).size() == 8000);

    {
        std::ofstream f(cfg);
        f << "nonsense=1\n";
    }
    CHECK(cli({"--config", cfg, "synth", "--kind", "tone", "--out", out}).code == 2);
    CHECK(cli({"--config", (dir / "none.cfg").string(), "synth"}).code == 2);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"synth", "--bogus"}).code == 2);
    const auto help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("enhance") != std::string::npos);
}
