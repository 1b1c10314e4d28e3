#include "tpad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"

namespace tpad::svg {

namespace {
constexpr double kW = 720, kH = 440;
constexpr double kMargin = 60;

struct Range {
    double lo, hi;
    double map(double v, double out_lo, double out_hi) const {
        if (hi == lo) return (out_lo + out_hi) / 2;
        return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
    }
};

Range range_of(const std::vector<double>& v) {
    double lo = 1e300, hi = -1e300;
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (lo > hi) {
        lo = 0;
        hi = 1;
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

std::string header(const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16' font-family='sans-serif'>" << title
       << "</text>\n";
    return os.str();
}

void axis_labels(std::ostringstream& os, const std::string& x_label, const std::string& y_label, const Range& xr,
                 const Range& yr) {
    os << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kW - kMargin / 2 << "' y2='"
       << kH - kMargin << "' stroke='black'/>\n";
    os << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kMargin << "' y2='" << kMargin / 2
       << "' stroke='black'/>\n";
    os << "<text x='" << kW / 2 << "' y='" << kH - 16 << "' text-anchor='middle' font-size='12' "
       << "font-family='sans-serif'>" << x_label << "</text>\n";
    os << "<text x='16' y='" << kH / 2 << "' text-anchor='middle' font-size='12' font-family='sans-serif' "
       << "transform='rotate(-90 16 " << kH / 2 << ")'>" << y_label << "</text>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", xr.lo);
    os << "<text x='" << kMargin << "' y='" << kH - kMargin + 16 << "' font-size='10' font-family='sans-serif'>"
       << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", xr.hi);
    os << "<text x='" << kW - kMargin / 2 << "' y='" << kH - kMargin + 16
       << "' text-anchor='end' font-size='10' font-family='sans-serif'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", yr.lo);
    os << "<text x='" << kMargin - 4 << "' y='" << kH - kMargin << "' text-anchor='end' font-size='10' "
       << "font-family='sans-serif'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", yr.hi);
    os << "<text x='" << kMargin - 4 << "' y='" << kMargin / 2 + 4 << "' text-anchor='end' font-size='10' "
       << "font-family='sans-serif'>" << buf << "</text>\n";
}
} // namespace

void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<double>& xs, const std::vector<double>& ys) {
    check_config(xs.size() == ys.size() && !xs.empty(), "line_plot: bad series");
    Range xr = range_of(xs), yr = range_of(ys);
    std::ostringstream os;
    os << header(title);
    axis_labels(os, x_label, y_label, xr, yr);
    os << "<polyline fill='none' stroke='#2060c0' stroke-width='2' points='";
    for (size_t i = 0; i < xs.size(); ++i) {
        os << xr.map(xs[i], kMargin, kW - kMargin / 2) << "," << yr.map(ys[i], kH - kMargin, kMargin / 2) << " ";
    }
    os << "'/>\n</svg>\n";
    io::atomic_write(path, os.str());
}

void dual_histogram(const std::filesystem::path& path, const std::string& title, const std::string& label_a,
                    const std::vector<double>& a, const std::string& label_b, const std::vector<double>& b,
                    int bins) {
    check_config(!a.empty() && !b.empty() && bins >= 2, "dual_histogram: bad inputs");
    std::vector<double> all = a;
    all.insert(all.end(), b.begin(), b.end());
    Range xr = range_of(all);

    auto binned = [&](const std::vector<double>& v) {
        std::vector<double> h(static_cast<size_t>(bins), 0.0);
        for (double x : v) {
            int i = static_cast<int>((x - xr.lo) / (xr.hi - xr.lo) * bins);
            i = std::clamp(i, 0, bins - 1);
            h[static_cast<size_t>(i)] += 1.0;
        }
        for (auto& c : h) c /= static_cast<double>(v.size());
        return h;
    };
    auto ha = binned(a), hb = binned(b);
    double peak = 0.0;
    for (double v : ha) peak = std::max(peak, v);
    for (double v : hb) peak = std::max(peak, v);
    Range yr{0.0, peak > 0 ? peak : 1.0};

    std::ostringstream os;
    os << header(title);
    axis_labels(os, "score", "fraction", xr, yr);
    const double bw = (kW - 1.5 * kMargin) / bins;
    for (int i = 0; i < bins; ++i) {
        double x = kMargin + i * bw;
        double ya = yr.map(ha[static_cast<size_t>(i)], kH - kMargin, kMargin / 2);
        double yb = yr.map(hb[static_cast<size_t>(i)], kH - kMargin, kMargin / 2);
        os << "<rect x='" << x << "' y='" << ya << "' width='" << bw * 0.45 << "' height='" << (kH - kMargin - ya)
           << "' fill='#2060c0' opacity='0.7'/>\n";
        os << "<rect x='" << x + bw * 0.45 << "' y='" << yb << "' width='" << bw * 0.45 << "' height='"
           << (kH - kMargin - yb) << "' fill='#c04020' opacity='0.7'/>\n";
    }
    os << "<rect x='" << kW - 200 << "' y='40' width='12' height='12' fill='#2060c0'/>\n";
    os << "<text x='" << kW - 182 << "' y='51' font-size='12' font-family='sans-serif'>" << label_a << "</text>\n";
    os << "<rect x='" << kW - 200 << "' y='60' width='12' height='12' fill='#c04020'/>\n";
    os << "<text x='" << kW - 182 << "' y='71' font-size='12' font-family='sans-serif'>" << label_b << "</text>\n";
    os << "</svg>\n";
    io::atomic_write(path, os.str());
}

} // namespace tpad::svg
