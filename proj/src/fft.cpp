#include "nob/fft.hpp"

#include <cmath>

#include "nob/errors.hpp"

namespace nob::fft {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft_pow2(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cd u = a[i + j];
                const cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein's algorithm turns a length-n DFT into a power-of-two convolution.
void fft_bluestein(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;
    std::vector<cd> w(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the chirp argument small
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * M_PI * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cd(std::cos(ang), std::sin(ang));
    }
    std::vector<cd> x(m, cd(0.0)), y(m, cd(0.0));
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * w[k];
    y[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(w[k]);
    fft_pow2(x, false);
    fft_pow2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_pow2(x, true);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k] * inv_m;
}

}  // namespace

void fft1(std::vector<cd>& x, bool inverse) {
    if (x.size() <= 1) return;
    if (is_pow2(x.size()))
        fft_pow2(x, inverse);
    else
        fft_bluestein(x, inverse);
}

namespace {

// Apply fft1 along one axis of the row-major (nx,ny,nz) block.
void fft_axis(std::vector<cd>& data, std::array<int, 3> e, int axis, bool inverse) {
    const int n[3] = {e[0], e[1], e[2]};
    const long long stride[3] = {static_cast<long long>(n[1]) * n[2], n[2], 1};
    std::vector<cd> line(static_cast<std::size_t>(n[axis]));
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int i = 0; i < n[a1]; ++i) {
        for (int j = 0; j < n[a2]; ++j) {
            const long long base = i * stride[a1] + j * stride[a2];
            for (int k = 0; k < n[axis]; ++k) line[static_cast<std::size_t>(k)] = data[static_cast<std::size_t>(base + k * stride[axis])];
            fft1(line, inverse);
            for (int k = 0; k < n[axis]; ++k) data[static_cast<std::size_t>(base + k * stride[axis])] = line[static_cast<std::size_t>(k)];
        }
    }
}

}  // namespace

std::vector<cd> fft3(const std::vector<cd>& x, std::array<int, 3> extents) {
    const std::size_t n = static_cast<std::size_t>(extents[0]) * extents[1] * extents[2];
    if (x.size() != n) throw ShapeError("fft3: data size does not match extents");
    std::vector<cd> out = x;
    for (int axis = 0; axis < 3; ++axis) fft_axis(out, extents, axis, false);
    return out;
}

std::vector<cd> ifft3(const std::vector<cd>& x, std::array<int, 3> extents) {
    const std::size_t n = static_cast<std::size_t>(extents[0]) * extents[1] * extents[2];
    if (x.size() != n) throw ShapeError("ifft3: data size does not match extents");
    std::vector<cd> out = x;
    for (int axis = 0; axis < 3; ++axis) fft_axis(out, extents, axis, true);
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= inv;
    return out;
}

std::vector<cd> fft3_real(const std::vector<double>& x, std::array<int, 3> extents) {
    std::vector<cd> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = cd(x[i], 0.0);
    return fft3(c, extents);
}

}  // namespace nob::fft
