#include "xsplat/ssim.hpp"

#include <cmath>

#include "xsplat/errors.hpp"

namespace xsplat {

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> g(n);
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        g[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// valid correlation along x: out is (W-n+1) x H
void filter_x(const std::vector<double>& in, int W, int H,
              const std::vector<double>& g, std::vector<double>& out) {
    const int n = int(g.size());
    const int Wo = W - n + 1;
    out.assign(std::size_t(Wo) * H, 0.0);
    for (int y = 0; y < H; ++y) {
        const double* row = &in[std::size_t(y) * W];
        double* orow = &out[std::size_t(y) * Wo];
        for (int x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += g[k] * row[x + k];
            orow[x] = acc;
        }
    }
}

// valid correlation along y: out is W x (H-n+1)
void filter_y(const std::vector<double>& in, int W, int H,
              const std::vector<double>& g, std::vector<double>& out) {
    const int n = int(g.size());
    const int Ho = H - n + 1;
    out.assign(std::size_t(W) * Ho, 0.0);
    for (int y = 0; y < Ho; ++y) {
        double* orow = &out[std::size_t(y) * W];
        for (int k = 0; k < n; ++k) {
            const double gk = g[k];
            const double* row = &in[std::size_t(y + k) * W];
            for (int x = 0; x < W; ++x) orow[x] += gk * row[x];
        }
    }
}

void filter_valid(const std::vector<double>& in, int W, int H,
                  const std::vector<double>& g, std::vector<double>& tmp,
                  std::vector<double>& out) {
    filter_x(in, W, H, g, tmp);
    filter_y(tmp, W - int(g.size()) + 1, H, g, out);
}

// adjoint of filter_valid: scatters a (W-n+1) x (H-n+1) field back to W x H
void adjoint_valid(const std::vector<double>& in, int W, int H,
                   const std::vector<double>& g, std::vector<double>& tmp,
                   std::vector<double>& out) {
    const int n = int(g.size());
    const int Wo = W - n + 1, Ho = H - n + 1;
    tmp.assign(std::size_t(Wo) * H, 0.0);
    for (int y = 0; y < Ho; ++y)
        for (int k = 0; k < n; ++k) {
            const double gk = g[k];
            const double* row = &in[std::size_t(y) * Wo];
            double* orow = &tmp[std::size_t(y + k) * Wo];
            for (int x = 0; x < Wo; ++x) orow[x] += gk * row[x];
        }
    out.assign(std::size_t(W) * H, 0.0);
    for (int y = 0; y < H; ++y) {
        const double* row = &tmp[std::size_t(y) * Wo];
        double* orow = &out[std::size_t(y) * W];
        for (int x = 0; x < Wo; ++x) {
            const double v = row[x];
            if (v == 0.0) continue;
            for (int k = 0; k < n; ++k) orow[x + k] += g[k] * v;
        }
    }
}

struct SsimFields {
    int Wo = 0, Ho = 0;
    std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
};

SsimFields compute_fields(const ProjectionImage& a, const ProjectionImage& b,
                          const std::vector<double>& g) {
    const int W = a.width, H = a.height, n = int(g.size());
    SsimFields f;
    f.Wo = W - n + 1;
    f.Ho = H - n + 1;
    std::vector<double> tmp, sq(a.pixels.size());
    filter_valid(a.pixels, W, H, g, tmp, f.mu_a);
    filter_valid(b.pixels, W, H, g, tmp, f.mu_b);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = a.pixels[i] * a.pixels[i];
    filter_valid(sq, W, H, g, tmp, f.m_aa);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = b.pixels[i] * b.pixels[i];
    filter_valid(sq, W, H, g, tmp, f.m_bb);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = a.pixels[i] * b.pixels[i];
    filter_valid(sq, W, H, g, tmp, f.m_ab);
    return f;
}

void check_inputs(const ProjectionImage& a, const ProjectionImage& b, int window) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeMismatch("ssim: image sizes differ");
    if (a.width < window || a.height < window)
        throw ShapeMismatch("ssim: image smaller than the window");
}

}  // namespace

double ssim_mean(const ProjectionImage& a, const ProjectionImage& b,
                 const SsimConfig& cfg) {
    check_inputs(a, b, cfg.window);
    const auto g = gaussian_window(cfg.window, cfg.sigma);
    const auto f = compute_fields(a, b, g);
    const double C1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
    const double C2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);

    double total = 0.0;
    const std::size_t N = f.mu_a.size();
    for (std::size_t i = 0; i < N; ++i) {
        const double ma = f.mu_a[i], mb = f.mu_b[i];
        const double va = f.m_aa[i] - ma * ma;
        const double vb = f.m_bb[i] - mb * mb;
        const double cov = f.m_ab[i] - ma * mb;
        const double A1 = 2.0 * ma * mb + C1, A2 = 2.0 * cov + C2;
        const double B1 = ma * ma + mb * mb + C1, B2 = va + vb + C2;
        total += (A1 * A2) / (B1 * B2);
    }
    return total / double(N);
}

double ssim_mean_with_gradient(const ProjectionImage& a, const ProjectionImage& b,
                               const SsimConfig& cfg, std::vector<double>& grad_a) {
    check_inputs(a, b, cfg.window);
    const auto g = gaussian_window(cfg.window, cfg.sigma);
    const auto f = compute_fields(a, b, g);
    const double C1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
    const double C2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);

    const std::size_t N = f.mu_a.size();
    const double invN = 1.0 / double(N);
    std::vector<double> d_mu(N), d_vaa(N), d_vab(N);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double ma = f.mu_a[i], mb = f.mu_b[i];
        const double va = f.m_aa[i] - ma * ma;
        const double vb = f.m_bb[i] - mb * mb;
        const double cov = f.m_ab[i] - ma * mb;
        const double A1 = 2.0 * ma * mb + C1, A2 = 2.0 * cov + C2;
        const double B1 = ma * ma + mb * mb + C1, B2 = va + vb + C2;
        const double S = (A1 * A2) / (B1 * B2);
        total += S;
        // partials of the local score w.r.t. mu_a, sigma_aa, sigma_ab
        const double dS_dmu = 2.0 * mb * A2 / (B1 * B2) - 2.0 * ma * S / B1;
        const double dS_dvaa = -S / B2;
        const double dS_dvab = 2.0 * A1 / (B1 * B2);
        // moment chain: sigma_aa = m_aa - mu_a^2, sigma_ab = m_ab - mu_a mu_b
        d_mu[i] = invN * (dS_dmu - 2.0 * ma * dS_dvaa - mb * dS_dvab);
        d_vaa[i] = invN * dS_dvaa;
        d_vab[i] = invN * dS_dvab;
    }

    const int W = a.width, H = a.height;
    std::vector<double> tmp, term;
    adjoint_valid(d_mu, W, H, g, tmp, grad_a);
    adjoint_valid(d_vaa, W, H, g, tmp, term);
    for (std::size_t i = 0; i < grad_a.size(); ++i) grad_a[i] += 2.0 * a.pixels[i] * term[i];
    adjoint_valid(d_vab, W, H, g, tmp, term);
    for (std::size_t i = 0; i < grad_a.size(); ++i) grad_a[i] += b.pixels[i] * term[i];

    return total * invN;
}

}  // namespace xsplat
