#pragma once

#include <Eigen/Dense>
#include <string>

namespace timbre {

/// Mono waveform with its sample rate. Stereo sources are downmixed on load.
struct AudioBuffer {
  Eigen::VectorXd samples;
  double sample_rate = 22050.0;

  double duration_s() const {
    return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a RIFF/WAVE file. Accepts PCM 16/24-bit and float32; stereo input
/// is averaged down to mono.
AudioBuffer load_wav(const std::string& path);

/// Writes mono 16-bit PCM.
void save_wav(const std::string& path, const AudioBuffer& audio);

/// Windowed-sinc resampler (64-tap Hann-windowed kernel). Identity when the
/// rates already match.
AudioBuffer resample(const AudioBuffer& in, double target_rate);

}  // namespace timbre
