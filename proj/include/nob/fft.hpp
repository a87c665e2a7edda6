#pragma once

#include <array>
#include <complex>
#include <vector>

namespace nob::fft {

using cd = std::complex<double>;

// Unnormalized forward DFT: X_k = sum_n x_n exp(-2*pi*i*k*n/N).
void fft1(std::vector<cd>& x, bool inverse);

// 3D transforms over row-major data with extents (nx,ny,nz). ifft3 applies
// the 1/N normalization so ifft3(fft3(x)) == x. Arbitrary extents are
// supported (radix-2 where possible, Bluestein otherwise).
std::vector<cd> fft3(const std::vector<cd>& x, std::array<int, 3> extents);
std::vector<cd> ifft3(const std::vector<cd>& x, std::array<int, 3> extents);

std::vector<cd> fft3_real(const std::vector<double>& x, std::array<int, 3> extents);

}  // namespace nob::fft
