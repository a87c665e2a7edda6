#include <cmath>
#include <complex>

#include "nob/errors.hpp"
#include "nob/fft.hpp"
#include "nob/tensor.hpp"

// 3D convolution and the spectral channel-mixing op used by Fourier layers.

namespace nob::ad {

namespace {

using fft::cd;

Value make_node(Shape shape, std::vector<double> vals, std::vector<Value> parents,
                std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val = std::move(vals);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

struct ConvGeom {
    int ci, co;
    int in[3], k[3], out[3], pad_lo[3];
    int stride;
};

ConvGeom conv_geometry(const Shape& xs, const Shape& ws, int stride, Padding pad) {
    if (xs.size() != 4) throw ShapeError("conv3: input must be [C,X,Y,Z], got " + shape_str(xs));
    if (ws.size() != 5) throw ShapeError("conv3: kernel must be [Co,Ci,kx,ky,kz], got " + shape_str(ws));
    if (ws[1] != xs[0]) throw ShapeError("conv3: kernel expects " + std::to_string(ws[1]) + " input channels, got " + std::to_string(xs[0]));
    if (stride < 1) throw ConfigError("conv3: stride must be >= 1");
    ConvGeom g;
    g.ci = xs[0];
    g.co = ws[0];
    g.stride = stride;
    for (int a = 0; a < 3; ++a) {
        g.in[a] = xs[a + 1];
        g.k[a] = ws[a + 2];
        if (g.k[a] % 2 == 0) throw ConfigError("conv3: kernel extents must be odd");
        if (pad == Padding::Valid) {
            if (g.k[a] > g.in[a]) throw ShapeError("conv3: kernel larger than input along axis " + std::to_string(a));
            g.out[a] = (g.in[a] - g.k[a]) / stride + 1;
            g.pad_lo[a] = 0;
        } else {
            g.out[a] = (g.in[a] + stride - 1) / stride;
            const int total = std::max(0, (g.out[a] - 1) * stride + g.k[a] - g.in[a]);
            g.pad_lo[a] = total / 2;
        }
    }
    return g;
}

}  // namespace

Value conv3(const Value& x, const Value& w, const Value& b, int stride, Padding pad) {
    const ConvGeom g = conv_geometry(x->shape, w->shape, stride, pad);
    if (b->size() != g.co) throw ShapeError("conv3: bias has " + std::to_string(b->size()) + " entries for " + std::to_string(g.co) + " output channels");
    const long long in_sl = static_cast<long long>(g.in[1]) * g.in[2];
    const long long out_n = static_cast<long long>(g.out[0]) * g.out[1] * g.out[2];
    std::vector<double> v(static_cast<std::size_t>(g.co) * out_n);
    auto at_in = [&](int c, int i, int j, int k) -> double {
        if (i < 0 || j < 0 || k < 0 || i >= g.in[0] || j >= g.in[1] || k >= g.in[2]) return 0.0;
        return x->val[static_cast<std::size_t>(c) * g.in[0] * in_sl + i * in_sl + static_cast<long long>(j) * g.in[2] + k];
    };
    std::size_t o = 0;
    for (int co = 0; co < g.co; ++co) {
        const double* wc = &w->val[static_cast<std::size_t>(co) * g.ci * g.k[0] * g.k[1] * g.k[2]];
        for (int oi = 0; oi < g.out[0]; ++oi)
            for (int oj = 0; oj < g.out[1]; ++oj)
                for (int ok = 0; ok < g.out[2]; ++ok) {
                    double acc = b->val[co];
                    const int i0 = oi * g.stride - g.pad_lo[0];
                    const int j0 = oj * g.stride - g.pad_lo[1];
                    const int k0 = ok * g.stride - g.pad_lo[2];
                    std::size_t wi = 0;
                    for (int ci = 0; ci < g.ci; ++ci)
                        for (int di = 0; di < g.k[0]; ++di)
                            for (int dj = 0; dj < g.k[1]; ++dj)
                                for (int dk = 0; dk < g.k[2]; ++dk)
                                    acc += wc[wi++] * at_in(ci, i0 + di, j0 + dj, k0 + dk);
                    v[o++] = acc;
                }
    }
    return make_node({g.co, g.out[0], g.out[1], g.out[2]}, std::move(v), {x, w, b}, [g, in_sl, out_n](Node& n) {
        const auto& x = n.parents[0];
        const auto& w = n.parents[1];
        const auto& b = n.parents[2];
        const bool gx = x->requires_grad, gw = w->requires_grad, gb = b->requires_grad;
        if (gx) x->ensure_grad();
        if (gw) w->ensure_grad();
        if (gb) b->ensure_grad();
        auto in_ok = [&](int i, int j, int k) {
            return i >= 0 && j >= 0 && k >= 0 && i < g.in[0] && j < g.in[1] && k < g.in[2];
        };
        std::size_t o = 0;
        for (int co = 0; co < g.co; ++co) {
            const std::size_t wbase = static_cast<std::size_t>(co) * g.ci * g.k[0] * g.k[1] * g.k[2];
            for (int oi = 0; oi < g.out[0]; ++oi)
                for (int oj = 0; oj < g.out[1]; ++oj)
                    for (int ok = 0; ok < g.out[2]; ++ok) {
                        const double go = n.grad[o++];
                        if (go == 0.0) continue;
                        if (gb) b->grad[co] += go;
                        const int i0 = oi * g.stride - g.pad_lo[0];
                        const int j0 = oj * g.stride - g.pad_lo[1];
                        const int k0 = ok * g.stride - g.pad_lo[2];
                        std::size_t wi = wbase;
                        for (int ci = 0; ci < g.ci; ++ci)
                            for (int di = 0; di < g.k[0]; ++di)
                                for (int dj = 0; dj < g.k[1]; ++dj)
                                    for (int dk = 0; dk < g.k[2]; ++dk, ++wi) {
                                        const int i = i0 + di, j = j0 + dj, k = k0 + dk;
                                        if (!in_ok(i, j, k)) continue;
                                        const std::size_t xi = static_cast<std::size_t>(ci) * g.in[0] * in_sl + i * in_sl +
                                                               static_cast<long long>(j) * g.in[2] + k;
                                        if (gw) w->grad[wi] += go * x->val[xi];
                                        if (gx) x->grad[xi] += go * w->val[wi];
                                    }
                    }
        }
        if (gx) x->grad_seen = true;
        if (gw) w->grad_seen = true;
        if (gb) b->grad_seen = true;
        (void)out_n;
    });
}

ModeSet make_mode_set(std::array<int, 3> extents, std::array<int, 3> modes) {
    ModeSet ms;
    ms.extents = extents;
    ms.modes = modes;
    for (int a = 0; a < 3; ++a) {
        if (extents[a] < 1) throw ConfigError("mode set: extents must be positive");
        if (modes[a] < 1 || modes[a] > extents[a])
            throw ConfigError("mode set: retained modes " + std::to_string(modes[a]) + " exceed extent " + std::to_string(extents[a]));
    }
    auto kept_axis = [](int k, int n, int m) { return k < m || n - k < m; };
    for (int kx = 0; kx < extents[0]; ++kx)
        for (int ky = 0; ky < extents[1]; ++ky)
            for (int kz = 0; kz < extents[2]; ++kz)
                if (kept_axis(kx, extents[0], modes[0]) && kept_axis(ky, extents[1], modes[1]) &&
                    kept_axis(kz, extents[2], modes[2]))
                    ms.kept.push_back({kx, ky, kz});
    return ms;
}

Value spectral_mix(const Value& x, const Value& r_re, const Value& r_im,
                   std::shared_ptr<const ModeSet> modes) {
    if (x->shape.size() != 2) throw ShapeError("spectral_mix: expected [N,C], got " + shape_str(x->shape));
    const auto e = modes->extents;
    const long long nspat = static_cast<long long>(e[0]) * e[1] * e[2];
    const int n = x->shape[0], c = x->shape[1];
    if (n != nspat) throw ShapeError("spectral_mix: node count " + std::to_string(n) + " does not match extents");
    const long long kcount = static_cast<long long>(modes->kept.size());
    if (r_re->size() != kcount * c * c || r_im->size() != kcount * c * c)
        throw ShapeError("spectral_mix: filter size does not match modes x channels");

    // per-channel forward FFT of the input
    auto spectra = std::make_shared<std::vector<std::vector<cd>>>(static_cast<std::size_t>(c));
    std::vector<double> line(static_cast<std::size_t>(n));
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = x->val[static_cast<std::size_t>(i) * c + ch];
        (*spectra)[static_cast<std::size_t>(ch)] = fft::fft3_real(line, e);
    }
    // channel mixing on retained modes
    std::vector<std::vector<cd>> mixed(static_cast<std::size_t>(c), std::vector<cd>(static_cast<std::size_t>(n), cd(0.0)));
    for (std::size_t ki = 0; ki < modes->kept.size(); ++ki) {
        const auto& km = modes->kept[ki];
        const long long pos = (static_cast<long long>(km[0]) * e[1] + km[1]) * e[2] + km[2];
        const std::size_t rb = ki * static_cast<std::size_t>(c) * c;
        for (int co = 0; co < c; ++co) {
            cd acc(0.0);
            for (int ci = 0; ci < c; ++ci) {
                const cd rw(r_re->val[rb + static_cast<std::size_t>(co) * c + ci],
                            r_im->val[rb + static_cast<std::size_t>(co) * c + ci]);
                acc += rw * (*spectra)[static_cast<std::size_t>(ci)][static_cast<std::size_t>(pos)];
            }
            mixed[static_cast<std::size_t>(co)][static_cast<std::size_t>(pos)] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(n) * c);
    for (int ch = 0; ch < c; ++ch) {
        auto spatial = fft::ifft3(mixed[static_cast<std::size_t>(ch)], e);
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i) * c + ch] = spatial[static_cast<std::size_t>(i)].real();
    }

    return make_node({n, c}, std::move(out), {x, r_re, r_im}, [modes, spectra, e, n, c](Node& nd) {
        const auto& x = nd.parents[0];
        const auto& r_re = nd.parents[1];
        const auto& r_im = nd.parents[2];
        // grad_Y = (1/N) * FFT(dL/dy) per output channel
        std::vector<std::vector<cd>> grad_y(static_cast<std::size_t>(c));
        std::vector<double> line(static_cast<std::size_t>(n));
        const double inv_n = 1.0 / static_cast<double>(n);
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = nd.grad[static_cast<std::size_t>(i) * c + ch];
            grad_y[static_cast<std::size_t>(ch)] = fft::fft3_real(line, e);
            for (auto& v : grad_y[static_cast<std::size_t>(ch)]) v *= inv_n;
        }
        const bool gx = x->requires_grad, gr = r_re->requires_grad, gi = r_im->requires_grad;
        if (gr) r_re->ensure_grad();
        if (gi) r_im->ensure_grad();
        std::vector<std::vector<cd>> grad_x_spec;
        if (gx) grad_x_spec.assign(static_cast<std::size_t>(c), std::vector<cd>(static_cast<std::size_t>(n), cd(0.0)));
        for (std::size_t ki = 0; ki < modes->kept.size(); ++ki) {
            const auto& km = modes->kept[ki];
            const long long pos = (static_cast<long long>(km[0]) * e[1] + km[1]) * e[2] + km[2];
            const std::size_t rb = ki * static_cast<std::size_t>(c) * c;
            for (int co = 0; co < c; ++co) {
                const cd gy = grad_y[static_cast<std::size_t>(co)][static_cast<std::size_t>(pos)];
                for (int ci = 0; ci < c; ++ci) {
                    const std::size_t ri = rb + static_cast<std::size_t>(co) * c + ci;
                    const cd xs = (*spectra)[static_cast<std::size_t>(ci)][static_cast<std::size_t>(pos)];
                    if (gr || gi) {
                        const cd grad_r = gy * std::conj(xs);
                        if (gr) r_re->grad[ri] += grad_r.real();
                        if (gi) r_im->grad[ri] += grad_r.imag();
                    }
                    if (gx) {
                        const cd rw(r_re->val[ri], r_im->val[ri]);
                        grad_x_spec[static_cast<std::size_t>(ci)][static_cast<std::size_t>(pos)] += std::conj(rw) * gy;
                    }
                }
            }
        }
        if (gx) {
            x->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                auto spatial = fft::ifft3(grad_x_spec[static_cast<std::size_t>(ch)], e);
                for (int i = 0; i < n; ++i)
                    x->grad[static_cast<std::size_t>(i) * c + ch] += spatial[static_cast<std::size_t>(i)].real() * static_cast<double>(n);
            }
            x->grad_seen = true;
        }
        if (gr) r_re->grad_seen = true;
        if (gi) r_im->grad_seen = true;
    });
}

}  // namespace nob::ad
