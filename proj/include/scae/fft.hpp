#pragma once

#include <complex>
#include <vector>

namespace scae {

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace scae
