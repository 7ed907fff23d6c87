#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpse/audio.hpp"
#include "mpse/losses.hpp"
#include "mpse/spectral.hpp"

namespace mpse {

/// Objective comparison of an estimate against its reference.
struct PairMetrics {
    double pd_deg = 0.0;
    double lsd_db = 0.0;
    double si_sdr_db = 0.0;
    LossReport losses;  ///< spectrum-based losses with the estimate's spectrum as the prediction
};

/// Throws std::invalid_argument on unequal lengths.
PairMetrics analyze_pair(const Waveform& reference, const Waveform& estimate, const StftConfig& cfg);

/// `name=value` lines (17 significant digits; SI-SDR may read `inf`).
std::string to_text(const PairMetrics& m);
/// Header line plus one data row.
std::string to_csv(const PairMetrics& m);

struct SweepRow {
    double snr_db = 0.0;
    double pd_deg = 0.0;
    double lsd_db = 0.0;
    double si_sdr_db = 0.0;
};

using Enhancer = std::function<Waveform(const Waveform&)>;

/// For each SNR: mix clean and noise, run `enhance` (identity if empty), and
/// score the result against the clean signal.
std::vector<SweepRow> snr_sweep(const Waveform& clean, const Waveform& noise, std::span<const double> grid,
                                const Enhancer& enhance, const StftConfig& cfg);

/// Columns snr_db,pd_deg,lsd_db,si_sdr_db; 9 significant digits.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace mpse
