#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace parapde {

/// Real-to-complex FFT of fixed length n. Owns its FFTW plans and buffers.
/// Unnormalized: inverse(forward(x)) == n * x.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const { return n_; }
  std::size_t spectrum_size() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

  std::vector<std::complex<double>> forward(std::span<const double> in);

 private:
  void release() noexcept;

  std::size_t n_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

/// Angular wavenumbers for a periodic domain of length `length` with n points,
/// in r2c ordering (0 .. n/2).
std::vector<double> wavenumbers(std::size_t n, double length);

}  // namespace parapde
