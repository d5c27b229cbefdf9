#include "cxr/metrics/prediction_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cxr {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

}  // namespace

std::vector<double> PredictionMatrix::column(std::size_t c) const {
    std::vector<double> out(num_samples());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = score(i, c);
    return out;
}

PredictionMatrix PredictionMatrix::select(std::span<const std::size_t> rows) const {
    PredictionMatrix out;
    out.class_names = class_names;
    const auto c = num_classes();
    out.labels.reserve(rows.size());
    out.scores.reserve(rows.size() * c);
    for (auto r : rows) {
        if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[r]);
        out.labels.push_back(labels[r]);
        out.scores.insert(out.scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(r * c),
                          scores.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
    }
    return out;
}

void PredictionMatrix::validate() const {
    const auto c = num_classes();
    if (c == 0) throw std::invalid_argument("prediction matrix has no classes");
    if (scores.size() != labels.size() * c) throw std::invalid_argument("scores must be N x C");
    if (!sample_ids.empty() && sample_ids.size() != labels.size())
        throw std::invalid_argument("one sample id per row required");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c) throw std::invalid_argument("label index out of range");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
}

void write_predictions(std::ostream& out, const PredictionMatrix& pred) {
    pred.validate();
    out << "sample_id\tlabel";
    for (const auto& name : pred.class_names) out << '\t' << name;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < pred.num_samples(); ++i) {
        out << (pred.sample_ids.empty() ? std::to_string(i) : pred.sample_ids[i]) << '\t'
            << pred.class_names[pred.labels[i]];
        for (double s : pred.row(i)) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, s);
            out << '\t' << std::string_view(buf, end - buf);
        }
        out << '\n';
    }
}

void save_predictions(const std::filesystem::path& file, const PredictionMatrix& pred) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    write_predictions(out, pred);
}

PredictionMatrix read_predictions(std::istream& in) {
    PredictionMatrix pred;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("prediction file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_tabs(line);
    if (header.size() < 3 || header[0] != "sample_id" || header[1] != "label")
        throw std::invalid_argument("prediction header must be: sample_id, label, <class names...>");
    pred.class_names.assign(header.begin() + 2, header.end());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != header.size())
            throw std::invalid_argument("prediction line " + std::to_string(line_no) + ": wrong column count");
        auto it = std::find(pred.class_names.begin(), pred.class_names.end(), cols[1]);
        if (it == pred.class_names.end())
            throw std::invalid_argument("prediction line " + std::to_string(line_no) + ": unknown class " + cols[1]);
        pred.sample_ids.push_back(cols[0]);
        pred.labels.push_back(static_cast<int>(it - pred.class_names.begin()));
        for (std::size_t c = 2; c < cols.size(); ++c) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
            if (ec != std::errc{} || ptr != cols[c].data() + cols[c].size())
                throw std::invalid_argument("prediction line " + std::to_string(line_no) + ": bad score '" + cols[c] + "'");
            pred.scores.push_back(v);
        }
    }
    pred.validate();
    return pred;
}

PredictionMatrix load_predictions(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    return read_predictions(in);
}

}  // namespace cxr
