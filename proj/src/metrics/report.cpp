#include "cxr/metrics/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cxr {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed(const std::optional<double>& v, int digits) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << *v;
    return s.str();
}

const std::vector<cv::Scalar>& palette() {
    static const std::vector<cv::Scalar> colors{{60, 60, 220}, {40, 160, 40}, {200, 120, 30}, {30, 30, 30},
                                                {180, 60, 180}, {0, 150, 200}};
    return colors;
}

}  // namespace

json report_to_json(const EvalReport& report) {
    json classes = json::array();
    for (const auto& c : report.classes) {
        json roc = json::array();
        for (const auto& p : c.roc)
            roc.push_back({std::isinf(p.threshold) ? json("inf") : json(p.threshold), p.fpr, p.tpr});
        classes.push_back({{"name", c.name},
                           {"support", c.support},
                           {"auroc", opt(c.auroc)},
                           {"sensitivity", opt(c.sensitivity)},
                           {"ppv", opt(c.ppv)},
                           {"roc", roc}});
    }
    json confusion = json::array();
    for (std::size_t t = 0; t < report.confusion.num_classes; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < report.confusion.num_classes; ++p) row.push_back(report.confusion.at(t, p));
        confusion.push_back(row);
    }
    json out{{"num_samples", report.num_samples},
             {"accuracy", report.accuracy},
             {"mean_auroc", opt(report.mean_auroc)},
             {"classes", classes},
             {"confusion_matrix", confusion}};
    if (report.bootstrap) {
        const auto& b = *report.bootstrap;
        out["bootstrap_f1"] = {{"point", b.point},         {"ci_low", b.ci_low},
                               {"ci_high", b.ci_high},     {"resamples", b.resamples},
                               {"resample_size", b.resample_size}, {"seed", b.seed}};
    }
    return out;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    std::size_t width = 10;
    for (const auto& c : report.classes) width = std::max(width, c.name.size() + 2);
    const int w = static_cast<int>(width);
    out << std::left << std::setw(w) << "Class" << std::right << std::setw(9) << "AUROC" << std::setw(13)
        << "Sensitivity" << std::setw(8) << "PPV" << std::setw(9) << "Support" << '\n';
    for (const auto& c : report.classes) {
        out << std::left << std::setw(w) << c.name << std::right << std::setw(9) << fixed(c.auroc, 4) << std::setw(13)
            << fixed(c.sensitivity, 3) << std::setw(8) << fixed(c.ppv, 3) << std::setw(9) << c.support << '\n';
    }
    out << "\nAccuracy:   " << fixed(report.accuracy, 4) << "  (" << report.confusion.trace() << "/"
        << report.num_samples << ")\n";
    out << "Mean AUROC: " << fixed(report.mean_auroc, 4) << '\n';
    if (report.bootstrap) {
        const auto& b = *report.bootstrap;
        out << "Macro F1:   " << fixed(b.point, 4) << "  95% CI " << fixed(b.ci_low, 4) << " - " << fixed(b.ci_high, 4)
            << "  (" << b.resamples << " resamples of " << b.resample_size << ")\n";
    }
    out << "\nConfusion matrix (rows = truth, columns = prediction)\n" << std::left << std::setw(w) << "";
    for (const auto& c : report.classes) out << std::right << std::setw(w) << c.name;
    out << '\n';
    for (std::size_t t = 0; t < report.confusion.num_classes; ++t) {
        out << std::left << std::setw(w) << report.classes[t].name;
        for (std::size_t p = 0; p < report.confusion.num_classes; ++p)
            out << std::right << std::setw(w) << report.confusion.at(t, p);
        out << '\n';
    }
    return out.str();
}

void render_roc_curves(const EvalReport& report, const std::filesystem::path& png) {
    constexpr int size = 600, margin = 60, plot = size - 2 * margin;
    cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
    auto to_px = [&](double fpr, double tpr) {
        return cv::Point(margin + static_cast<int>(fpr * plot), size - margin - static_cast<int>(tpr * plot));
    };
    cv::rectangle(img, to_px(0, 1), to_px(1, 0), cv::Scalar(0, 0, 0), 1);
    cv::line(img, to_px(0, 0), to_px(1, 1), cv::Scalar(180, 180, 180), 1, cv::LINE_AA);
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        char label[8];
        std::snprintf(label, sizeof label, "%.2f", v);
        cv::putText(img, label, to_px(v, 0) + cv::Point(-14, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
        cv::putText(img, label, to_px(0, v) + cv::Point(-42, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    }
    cv::putText(img, "False positive rate", cv::Point(size / 2 - 70, size - 15), cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0));
    cv::putText(img, "True positive rate", cv::Point(8, margin - 20), cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0));
    int legend_y = size - margin - 20 * static_cast<int>(report.classes.size());
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        const auto& m = report.classes[c];
        const auto color = palette()[c % palette().size()];
        for (std::size_t i = 1; i < m.roc.size(); ++i)
            cv::line(img, to_px(m.roc[i - 1].fpr, m.roc[i - 1].tpr), to_px(m.roc[i].fpr, m.roc[i].tpr), color, 2,
                     cv::LINE_AA);
        const std::string text = m.name + " (AUROC " + fixed(m.auroc, 4) + ")";
        cv::line(img, cv::Point(size / 2 - 10, legend_y - 4), cv::Point(size / 2 + 10, legend_y - 4), color, 2);
        cv::putText(img, text, cv::Point(size / 2 + 16, legend_y), cv::FONT_HERSHEY_SIMPLEX, 0.45, color);
        legend_y += 20;
    }
    if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
    cv::imwrite(png.string(), img);
}

void render_confusion_matrix(const EvalReport& report, const std::filesystem::path& png) {
    const int n = static_cast<int>(report.confusion.num_classes);
    constexpr int cell = 110, left = 170, top = 60;
    cv::Mat img(top + n * cell + 80, left + n * cell + 20, CV_8UC3, cv::Scalar(255, 255, 255));
    for (int t = 0; t < n; ++t) {
        const auto row_total = std::max<std::size_t>(report.confusion.row_sum(static_cast<std::size_t>(t)), 1);
        for (int p = 0; p < n; ++p) {
            const auto count = report.confusion.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
            const double frac = static_cast<double>(count) / static_cast<double>(row_total);
            const cv::Scalar fill(255 - 200 * frac, 255 - 120 * frac, 255 - 40 * frac);
            const cv::Rect r(left + p * cell, top + t * cell, cell, cell);
            cv::rectangle(img, r, fill, cv::FILLED);
            cv::rectangle(img, r, cv::Scalar(120, 120, 120), 1);
            cv::putText(img, std::to_string(count), cv::Point(r.x + cell / 2 - 14, r.y + cell / 2 + 6),
                        cv::FONT_HERSHEY_SIMPLEX, 0.6, frac > 0.6 ? cv::Scalar(255, 255, 255) : cv::Scalar(0, 0, 0), 1,
                        cv::LINE_AA);
        }
        cv::putText(img, report.classes[static_cast<std::size_t>(t)].name,
                    cv::Point(8, top + t * cell + cell / 2 + 5), cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(0, 0, 0));
        cv::putText(img, report.classes[static_cast<std::size_t>(t)].name.substr(0, 14),
                    cv::Point(left + t * cell + 4, top + n * cell + 22), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                    cv::Scalar(0, 0, 0));
    }
    cv::putText(img, "truth (rows) / prediction (columns)", cv::Point(left, 30), cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0));
    if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
    cv::imwrite(png.string(), img);
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "report.json") << report_to_json(report).dump(2) << '\n';
    std::ofstream(dir / "report.txt") << format_report(report);
    render_roc_curves(report, dir / "roc_curves.png");
    render_confusion_matrix(report, dir / "confusion_matrix.png");
}

}  // namespace cxr
