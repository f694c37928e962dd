#include "parapde/fft.hpp"

#include <cstring>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace parapde {

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw std::invalid_argument("RealFft needs n >= 2");
  real_ = fftw_alloc_real(n);
  spec_ = fftw_alloc_complex(n / 2 + 1);
  // FFTW_ESTIMATE keeps plan selection independent of timing, so results are
  // bit-reproducible from run to run.
  fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, spec_, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : n_(other.n_), real_(other.real_), spec_(other.spec_), fwd_(other.fwd_), inv_(other.inv_) {
  other.real_ = nullptr;
  other.spec_ = nullptr;
  other.fwd_ = nullptr;
  other.inv_ = nullptr;
}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = other.n_;
    std::swap(real_, other.real_);
    std::swap(spec_, other.spec_);
    std::swap(fwd_, other.fwd_);
    std::swap(inv_, other.inv_);
  }
  return *this;
}

void RealFft::release() noexcept {
  if (fwd_) fftw_destroy_plan(fwd_);
  if (inv_) fftw_destroy_plan(inv_);
  if (real_) fftw_free(real_);
  if (spec_) fftw_free(spec_);
  fwd_ = inv_ = nullptr;
  real_ = nullptr;
  spec_ = nullptr;
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() != n_ || out.size() != spectrum_size())
    throw std::invalid_argument("RealFft::forward size mismatch");
  std::memcpy(real_, in.data(), n_ * sizeof(double));
  fftw_execute(fwd_);
  std::memcpy(static_cast<void*>(out.data()), spec_, spectrum_size() * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  if (in.size() != spectrum_size() || out.size() != n_)
    throw std::invalid_argument("RealFft::inverse size mismatch");
  std::memcpy(spec_, in.data(), spectrum_size() * sizeof(fftw_complex));
  fftw_execute(inv_);
  std::memcpy(out.data(), real_, n_ * sizeof(double));
}

std::vector<std::complex<double>> RealFft::forward(std::span<const double> in) {
  std::vector<std::complex<double>> out(spectrum_size());
  forward(in, out);
  return out;
}

std::vector<double> wavenumbers(std::size_t n, double length) {
  std::vector<double> k(n / 2 + 1);
  for (std::size_t m = 0; m < k.size(); ++m)
    k[m] = 2.0 * std::numbers::pi * static_cast<double>(m) / length;
  return k;
}

}  // namespace parapde
