#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mpse {

enum class VerifySuite { roundtrip, gradcheck, invariants };

VerifySuite parse_verify_suite(const std::string& name);
std::string to_string(VerifySuite suite);

struct VerifyOptions {
    std::uint64_t seed = 0;
    /// Multiplies every tolerance; values below 1 tighten the suite.
    double tolerance_scale = 1.0;
    int points = 100;
};

struct VerifyCheck {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Runs one property suite; every check reports its worst observed error.
std::vector<VerifyCheck> run_suite(VerifySuite suite, const VerifyOptions& options = {});

}  // namespace mpse
