#include "mpse/evaluation.hpp"

#include <sstream>
#include <stdexcept>

#include "mpse/metrics.hpp"
#include "mpse/phase.hpp"

namespace mpse {

PairMetrics analyze_pair(const Waveform& reference, const Waveform& estimate, const StftConfig& cfg) {
    if (reference.size() != estimate.size())
        throw std::invalid_argument("analyze: length mismatch (" + std::to_string(reference.size()) + " vs " +
                                    std::to_string(estimate.size()) + " samples)");
    const ComplexSpectrum ref_spec = stft(reference, cfg);
    const ComplexSpectrum est_spec = stft(estimate, cfg);
    const auto [ref_mag, ref_phase] = mag_phase(ref_spec);
    const auto [est_mag, est_phase] = mag_phase(est_spec);

    PairMetrics m;
    m.pd_deg = phase_distance(ref_mag, ref_phase, est_phase);
    m.lsd_db = lsd(ref_mag, est_mag);
    m.si_sdr_db = si_sdr(reference, estimate);
    m.losses = generator_losses(ref_spec, {compress(est_mag, cfg.compression_factor), est_phase}, cfg);
    m.losses.grad_mag_c.reset();
    m.losses.grad_phase.reset();
    return m;
}

std::string to_text(const PairMetrics& m) {
    std::ostringstream os;
    os << "pd_deg=" << format_number(m.pd_deg, 17) << '\n';
    os << "lsd_db=" << format_number(m.lsd_db, 17) << '\n';
    os << "si_sdr_db=" << format_number(m.si_sdr_db, 17) << '\n';
    os << to_text(m.losses);
    return os.str();
}

std::string to_csv(const PairMetrics& m) {
    const auto& l = m.losses;
    std::ostringstream os;
    os << "pd_deg,lsd_db,si_sdr_db,mag,ip,gd,iaf,pha,com,con,metric,total\n";
    const double values[] = {m.pd_deg, m.lsd_db, m.si_sdr_db, l.mag, l.ip,     l.gd,
                             l.iaf,    l.pha,    l.com,       l.con, l.metric, l.total};
    for (std::size_t i = 0; i < std::size(values); ++i) os << (i ? "," : "") << format_number(values[i], 17);
    os << '\n';
    return os.str();
}

std::vector<SweepRow> snr_sweep(const Waveform& clean, const Waveform& noise, std::span<const double> grid,
                                const Enhancer& enhance, const StftConfig& cfg) {
    const ComplexSpectrum clean_spec = stft(clean, cfg);
    const auto [clean_mag, clean_phase] = mag_phase(clean_spec);
    std::vector<SweepRow> rows;
    for (double snr : grid) {
        const Waveform noisy = mix_at_snr(clean, noise, snr);
        const Waveform out = enhance ? enhance(noisy) : noisy;
        const auto [mag, phase] = mag_phase(stft(out, cfg));
        rows.push_back({snr, phase_distance(clean_mag, clean_phase, phase), lsd(clean_mag, mag), si_sdr(clean, out)});
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream os;
    os << "snr_db,pd_deg,lsd_db,si_sdr_db\n";
    for (const auto& r : rows)
        os << format_number(r.snr_db, 9) << ',' << format_number(r.pd_deg, 9) << ',' << format_number(r.lsd_db, 9)
           << ',' << format_number(r.si_sdr_db, 9) << '\n';
    return os.str();
}

}  // namespace mpse
