// diarkit/features.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_FEATURES_HPP
#define DIARKIT_FEATURES_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "diarkit/audio_io.hpp"
#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"

namespace diarkit {

struct FrameSpec {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int num_mel_filters = 23;
  int num_ceps = 13;
  int fft_size = 512;
  double pre_emphasis = 0.97;
  double low_freq = 20.0;   // mel filterbank lower edge, Hz
  double high_freq = 0.0;   // 0 = Nyquist

  void validate() const {
    if (frame_shift_ms <= 0.0 || frame_length_ms < frame_shift_ms)
      throw ContractError("FrameSpec: need frame_length >= frame_shift > 0");
    if (num_ceps > num_mel_filters)
      throw ContractError("FrameSpec: num_ceps must not exceed num_mel_filters");
    if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
      throw ContractError("FrameSpec: fft_size must be a power of two");
  }

  int frame_samples(int sample_rate) const {
    return static_cast<int>(std::lround(frame_length_ms * sample_rate / 1000.0));
  }
  int shift_samples(int sample_rate) const {
    return static_cast<int>(std::lround(frame_shift_ms * sample_rate / 1000.0));
  }
};

struct FeatureMatrix {
  Matrix values;               // T x num_ceps
  double frame_shift_ms = 10.0;

  std::size_t num_frames() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

inline constexpr double kEnergyFloor = 1e-10;  // log energies floored at log(1e-10)

// closed-form frame count for a signal of n samples
inline std::size_t expected_frame_count(std::size_t n, int frame, int shift) {
  if (n < static_cast<std::size_t>(frame)) return 0;
  return 1 + (n - frame) / shift;
}

namespace detail {

// In-place radix-2 Cooley-Tukey FFT (decimation in time).
inline void fft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (j > i) std::swap(x[i], x[j]);
    std::size_t m = n >> 1;
    while (m >= 1 && j >= m) {
      j -= m;
      m >>= 1;
    }
    j += m;
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -6.283185307179586476925286766559 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filterbank, triangles linear in the mel domain.
// Returns (num_filters x num_bins) weights over FFT power bins.
inline Matrix mel_filterbank(int num_filters, int fft_size, int sample_rate,
                             double low_freq, double high_freq) {
  if (high_freq <= 0.0) high_freq = sample_rate / 2.0;
  const int num_bins = fft_size / 2 + 1;
  const double mel_low = hz_to_mel(low_freq);
  const double mel_high = hz_to_mel(high_freq);
  Matrix fb(num_filters, num_bins);
  for (int f = 0; f < num_filters; ++f) {
    const double left = mel_low + (mel_high - mel_low) * f / (num_filters + 1);
    const double center = mel_low + (mel_high - mel_low) * (f + 1) / (num_filters + 1);
    const double right = mel_low + (mel_high - mel_low) * (f + 2) / (num_filters + 1);
    for (int k = 0; k < num_bins; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
      double w = 0.0;
      if (mel > left && mel < right) {
        w = mel <= center ? (mel - left) / (center - left)
                          : (right - mel) / (right - center);
      }
      fb(f, k) = w;
    }
  }
  return fb;
}

}  // namespace detail

/// MFCC extraction. Per frame: raw log energy, pre-emphasis, Hamming window,
/// power spectrum, mel filterbank, floored log, orthonormal DCT-II; C0 is
/// replaced by the log frame energy.
inline FeatureMatrix compute_mfcc(const AudioSignal& signal, const FrameSpec& spec) {
  spec.validate();
  if (signal.sample_rate <= 0) throw ContractError("compute_mfcc: invalid sample rate");
  const int frame = spec.frame_samples(signal.sample_rate);
  const int shift = spec.shift_samples(signal.sample_rate);
  if (frame > spec.fft_size)
    throw ContractError("compute_mfcc: fft_size smaller than frame length");
  if (signal.samples.size() < static_cast<std::size_t>(frame))
    throw DataError(format("compute_mfcc: %s shorter than one frame (%zu < %d samples)",
                           signal.recording_id.c_str(), signal.samples.size(), frame));

  const std::size_t num_frames =
      expected_frame_count(signal.samples.size(), frame, shift);
  const int num_bins = spec.fft_size / 2 + 1;

  std::vector<double> window(frame);
  for (int i = 0; i < frame; ++i)
    window[i] = 0.54 - 0.46 * std::cos(6.283185307179586476925286766559 * i /
                                       (frame - 1));

  const Matrix fb = detail::mel_filterbank(spec.num_mel_filters, spec.fft_size,
                                           signal.sample_rate, spec.low_freq,
                                           spec.high_freq);

  // orthonormal DCT-II
  Matrix dct(spec.num_ceps, spec.num_mel_filters);
  const double m = spec.num_mel_filters;
  for (int k = 0; k < spec.num_ceps; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / m);
    for (int j = 0; j < spec.num_mel_filters; ++j)
      dct(k, j) = scale * std::cos(3.1415926535897932384626433832795 * k *
                                   (2.0 * j + 1.0) / (2.0 * m));
  }

  FeatureMatrix out;
  out.frame_shift_ms = spec.frame_shift_ms;
  out.values = Matrix(num_frames, spec.num_ceps);

  std::vector<double> buf(frame);
  std::vector<std::complex<double>> fft(spec.fft_size);
  std::vector<double> power(num_bins), mel(spec.num_mel_filters);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const float* src = signal.samples.data() + t * shift;

    // raw energy before pre-emphasis and windowing
    double energy = 0.0;
    for (int i = 0; i < frame; ++i) {
      buf[i] = src[i];
      energy += buf[i] * buf[i];
    }
    const double log_energy = std::log(std::max(energy, kEnergyFloor));

    // pre-emphasis within the frame; first sample emphasized against itself
    for (int i = frame - 1; i > 0; --i) buf[i] -= spec.pre_emphasis * buf[i - 1];
    buf[0] -= spec.pre_emphasis * buf[0];

    for (int i = 0; i < frame; ++i) fft[i] = buf[i] * window[i];
    for (int i = frame; i < spec.fft_size; ++i) fft[i] = 0.0;
    detail::fft_inplace(fft);
    for (int k = 0; k < num_bins; ++k) power[k] = std::norm(fft[k]);

    for (int f = 0; f < spec.num_mel_filters; ++f) {
      double acc = 0.0;
      const double* w = fb.row(f);
      for (int k = 0; k < num_bins; ++k) acc += w[k] * power[k];
      mel[f] = std::log(std::max(acc, kEnergyFloor));
    }

    double* dst = out.values.row(t);
    for (int k = 0; k < spec.num_ceps; ++k) {
      double acc = 0.0;
      const double* d = dct.row(k);
      for (int j = 0; j < spec.num_mel_filters; ++j) acc += d[j] * mel[j];
      dst[k] = acc;
    }
    dst[0] = log_energy;
  }
  return out;
}

/// Per-column mean/variance normalization (population variance). Columns
/// with variance below 1e-12 are mean-centered only.
inline FeatureMatrix cmvn(const FeatureMatrix& features) {
  const std::size_t t = features.num_frames();
  const std::size_t d = features.dim();
  if (t < 2) throw DataError("cmvn: need at least 2 frames");

  FeatureMatrix out = features;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += features.values(r, c);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) {
      const double dev = features.values(r, c) - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(t);
    if (var < 1e-12) {
      for (std::size_t r = 0; r < t; ++r) out.values(r, c) = features.values(r, c) - mean;
    } else {
      const double inv_std = 1.0 / std::sqrt(var);
      for (std::size_t r = 0; r < t; ++r)
        out.values(r, c) = (features.values(r, c) - mean) * inv_std;
    }
  }
  return out;
}

/// Sliding-window cepstral mean subtraction (no variance normalization).
/// center=true uses a window [t-(w-1)/2, t+w/2] truncated at the edges;
/// center=false uses the trailing window [t-w+1, t].
inline FeatureMatrix sliding_cmn(const FeatureMatrix& features, int window,
                                 bool center = true) {
  if (window < 1) throw ContractError("sliding_cmn: window must be >= 1");
  const std::size_t t = features.num_frames();
  const std::size_t d = features.dim();
  FeatureMatrix out = features;
  for (std::size_t r = 0; r < t; ++r) {
    long lo, hi;  // inclusive frame range
    if (center) {
      lo = static_cast<long>(r) - (window - 1) / 2;
      hi = static_cast<long>(r) + window / 2;
    } else {
      lo = static_cast<long>(r) - window + 1;
      hi = static_cast<long>(r);
    }
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(t) - 1);
    const double count = static_cast<double>(hi - lo + 1);
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (long k = lo; k <= hi; ++k) mean += features.values(static_cast<std::size_t>(k), c);
      out.values(r, c) = features.values(r, c) - mean / count;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature archive: magic "DKF1", u32 rows, u32 cols, f32 row-major payload.
// ---------------------------------------------------------------------------

inline void write_feature_archive(const std::string& path, const FeatureMatrix& f) {
  BinaryWriter w(path);
  w.magic("DKF1");
  w.u32(static_cast<std::uint32_t>(f.values.rows()));
  w.u32(static_cast<std::uint32_t>(f.values.cols()));
  for (std::size_t i = 0; i < f.values.size(); ++i)
    w.f32(static_cast<float>(f.values.data()[i]));
  w.close();
}

// The archive stores only the matrix; the frame shift comes from the caller's
// feature configuration.
inline FeatureMatrix read_feature_archive(const std::string& path,
                                          double frame_shift_ms = 10.0) {
  BinaryReader r(path);
  r.expect_magic("DKF1");
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  FeatureMatrix f;
  f.frame_shift_ms = frame_shift_ms;
  f.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values.data()[i] = r.f32();
  return f;
}

}  // namespace diarkit

#endif  // DIARKIT_FEATURES_HPP
