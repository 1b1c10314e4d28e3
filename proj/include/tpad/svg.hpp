#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tpad::svg {

// Minimal SVG emitters for the run reports; no external renderer involved.
void line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<double>& xs, const std::vector<double>& ys);

// Two overlaid value distributions binned on a shared range.
void dual_histogram(const std::filesystem::path& path, const std::string& title, const std::string& label_a,
                    const std::vector<double>& a, const std::string& label_b, const std::vector<double>& b,
                    int bins = 24);

} // namespace tpad::svg
