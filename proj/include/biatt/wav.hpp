#pragma once

#include <string>
#include <vector>

#include "biatt/common.hpp"

namespace biatt {

// Mono audio in linear amplitude, nominally within +-1.0.
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 16000;

    int length() const { return static_cast<int>(samples.size()); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// PCM16 mono little-endian RIFF only; anything else is rejected with a
// descriptive IoError.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& wave);

// Throws InvalidInput on NaN/Inf samples or an unexpected sample rate.
void validate_pipeline_input(const Waveform& wave, int expected_rate = 16000);

}  // namespace biatt
