#include "mrp/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mrp/error.hpp"

namespace mrp {

namespace {

std::vector<double> gaussian_1d(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size));
    const double center = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - center;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable "valid" filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
    const std::size_t n = k.size();
    const std::size_t oh = h - n + 1;
    const std::size_t ow = w - n + 1;
    std::vector<double> tmp(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += k[i] * img[y * w + x + i];
            tmp[y * ow + x] = s;
        }
    }
    std::vector<double> out(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += k[i] * tmp[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

Tensor3 to_luma(const Tensor3& image) {
    if (image.channels() == 1) return image;
    if (image.channels() != 3) throw InputError("SSIM expects 1 or 3 channel images");
    Tensor3 out(1, image.height(), image.width());
    auto r = image.plane(0), g = image.plane(1), b = image.plane(2);
    auto dst = out.plane(0);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<float>(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
    }
    return out;
}

double ssim(const Tensor3& a, const Tensor3& b, const SsimParams& params) {
    if (!a.same_shape(b)) throw UsageError("ssim: images differ in size");
    const Tensor3 la = to_luma(a);
    const Tensor3 lb = to_luma(b);
    const std::size_t h = la.height();
    const std::size_t w = la.width();

    int window = std::min<int>(params.window, static_cast<int>(std::min(h, w)));
    if (window % 2 == 0) --window;
    const auto kernel = gaussian_1d(window, params.sigma);

    const std::size_t n = h * w;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = la.values()[i];
        y[i] = lb.values()[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = filter_valid(x, h, w, kernel);
    const auto mu_y = filter_valid(y, h, w, kernel);
    const auto e_xx = filter_valid(xx, h, w, kernel);
    const auto e_yy = filter_valid(yy, h, w, kernel);
    const auto e_xy = filter_valid(xy, h, w, kernel);

    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = e_xx[i] - mx * mx;
        const double vy = e_yy[i] - my * my;
        const double cov = e_xy[i] - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mu_x.size());
}

}  // namespace mrp
