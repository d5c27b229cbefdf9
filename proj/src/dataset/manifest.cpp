#include "cxr/dataset/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "cxr/core/errors.hpp"
#include "cxr/dataset/csv.hpp"

namespace fs = std::filesystem;

namespace cxr {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_image_file(const fs::path& p) {
    const auto ext = lower(p.extension().string());
    return ext == ".jpeg" || ext == ".jpg" || ext == ".png";
}

int label_index(const std::vector<std::string>& classes, std::string_view name) {
    auto it = std::find(classes.begin(), classes.end(), name);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

std::optional<std::size_t> find_column(const CsvRow& header, std::initializer_list<std::string_view> names) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = lower(trim(header[i]));
        for (auto n : names)
            if (h == n) return i;
    }
    return std::nullopt;
}

std::optional<Finding> finding_from_dir(std::string_view dir) {
    const auto d = lower(dir);
    if (d == "normal") return Finding::Normal;
    if (d == "bacteria" || d == "bacterial") return Finding::BacterialPneumonia;
    if (d == "virus" || d == "viral") return Finding::ViralPneumonia;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw DataError("unknown split '" + std::string(text) + "'");
}

std::vector<SplitCounts> count_by_class(const std::vector<ImageRecord>& records, std::size_t num_classes) {
    std::vector<SplitCounts> counts(num_classes, SplitCounts{0, 0, 0});
    for (const auto& r : records) {
        if (r.label < 0 || static_cast<std::size_t>(r.label) >= num_classes)
            throw DataError("label index out of range for " + r.image_path.string());
        ++counts[r.label][static_cast<std::size_t>(r.split)];
    }
    return counts;
}

void DatasetManifest::recount() { class_counts = count_by_class(records, classes.size()); }

void DatasetManifest::validate() const {
    std::map<std::string, Split> patient_split;
    for (const auto& r : records) {
        if (r.label < 0 || static_cast<std::size_t>(r.label) >= classes.size())
            throw DataError("record " + r.image_path.string() + " has a label outside the configured classes");
        if (r.patient_id.empty())
            throw DataError("record " + r.image_path.string() + " has an empty patient id");
        auto [it, inserted] = patient_split.emplace(r.patient_id, r.split);
        if (!inserted && it->second != r.split)
            throw DataError("patient " + r.patient_id + " occurs in more than one split");
    }
    if (class_counts != count_by_class(records, classes.size()))
        throw DataError("class_counts do not match the records");
}

std::vector<ImageRecord> DatasetManifest::records_in(Split split) const {
    std::vector<ImageRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [split](const ImageRecord& r) { return r.split == split; });
    return out;
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    out << "image_path\tpatient_id\tlabel\tsplit\n";
    for (const auto& r : manifest.records) {
        out << r.image_path.string() << '\t' << r.patient_id << '\t' << manifest.classes.at(r.label) << '\t'
            << to_string(r.split) << '\n';
    }
}

void save_manifest(const fs::path& file, const DatasetManifest& manifest) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write manifest " + file.string());
    write_manifest(out, manifest);
}

DatasetManifest read_manifest(std::istream& in, const std::vector<std::string>& classes) {
    DatasetManifest m;
    m.classes = classes;
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty");
    if (trim(line) != "image_path\tpatient_id\tlabel\tsplit")
        throw DataError("manifest header must be: image_path, patient_id, label, split");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 4) throw DataError("manifest line " + std::to_string(line_no) + ": expected 4 columns");
        ImageRecord r;
        r.image_path = cols[0];
        r.patient_id = cols[1];
        r.label = label_index(classes, cols[2]);
        if (r.label < 0)
            throw DataError("manifest line " + std::to_string(line_no) + ": unknown class '" + cols[2] + "'");
        r.split = parse_split(cols[3]);
        m.records.push_back(std::move(r));
    }
    m.recount();
    m.validate();
    return m;
}

DatasetManifest load_manifest(const fs::path& file, const std::vector<std::string>& classes) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read manifest " + file.string());
    return read_manifest(in, classes);
}

std::string format_split_table(const DatasetManifest& manifest) {
    std::ostringstream out;
    std::size_t width = 6;
    for (const auto& c : manifest.classes) width = std::max(width, c.size() + 2);
    out << std::left << std::setw(7) << "";
    for (const auto& c : manifest.classes) out << std::right << std::setw(static_cast<int>(width)) << c;
    out << std::setw(static_cast<int>(width)) << "Total" << '\n';
    std::size_t grand = 0;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        std::string name(to_string(s));
        name[0] = static_cast<char>(std::toupper(name[0]));
        out << std::left << std::setw(7) << name;
        std::size_t total = 0;
        for (const auto& counts : manifest.class_counts) {
            const auto n = counts[static_cast<std::size_t>(s)];
            total += n;
            out << std::right << std::setw(static_cast<int>(width)) << n;
        }
        grand += total;
        out << std::setw(static_cast<int>(width)) << total << '\n';
    }
    out << "(" << grand << " images, " << manifest.records.size() << " records)\n";
    return out.str();
}

bool is_frontal_view(std::string_view view) {
    auto v = lower(trim(view));
    // PA, AP, "AP Supine", "AP semi erect", "AP erect"; laterals are "L"
    return v.rfind("pa", 0) == 0 || v.rfind("ap", 0) == 0;
}

std::string pneumonia_patient_id(const fs::path& file) {
    static const std::regex person(R"(^(person\d+)_.*)", std::regex::icase);
    static const std::regex im(R"(^(.*IM-\d+)-\d+.*)", std::regex::icase);
    const auto stem = file.stem().string();
    std::smatch m;
    if (std::regex_match(stem, m, person)) return m[1];
    if (std::regex_match(stem, m, im)) return m[1];
    return stem;
}

void write_rejects(std::ostream& out, const std::vector<Reject>& rejects) {
    for (const auto& r : rejects) out << r.path.string() << '\t' << r.reason << '\n';
}

IngestResult build_manifest(const CovidSource& covid, const PneumoniaSource& pneumonia, ClassMode mode) {
    IngestResult result;
    auto& m = result.manifest;
    m.classes = class_names(mode);

    // COVID-19 source: metadata table drives everything.
    std::ifstream meta(covid.metadata, std::ios::binary);
    if (!meta) throw DataError("cannot read COVID metadata table " + covid.metadata.string());
    const auto rows = read_delimited(meta);
    if (rows.empty()) throw DataError("COVID metadata table is empty: " + covid.metadata.string());
    const auto& header = rows.front();
    const auto col_patient = find_column(header, {"patientid", "patient_id", "patient id"});
    const auto col_finding = find_column(header, {"finding"});
    const auto col_view = find_column(header, {"view", "projection"});
    const auto col_file = find_column(header, {"filename", "file"});
    const auto col_folder = find_column(header, {"folder"});
    const auto col_modality = find_column(header, {"modality"});
    {
        std::vector<std::string> missing;
        if (!col_patient) missing.push_back("patient id");
        if (!col_finding) missing.push_back("finding");
        if (!col_view) missing.push_back("view");
        if (!col_file) missing.push_back("filename");
        if (!missing.empty()) {
            std::string msg = "COVID metadata table lacks required columns:";
            for (const auto& c : missing) msg += " " + c;
            throw DataError(msg);
        }
    }
    const int covid_label = class_index(mode, Finding::Covid19);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        auto cell = [&](std::optional<std::size_t> c) -> std::string {
            return c && *c < row.size() ? trim(row[*c]) : std::string{};
        };
        const auto finding = lower(cell(col_finding));
        if (finding.find("covid-19") == std::string::npos && finding.find("covid19") == std::string::npos) continue;
        if (col_modality) {
            const auto modality = lower(cell(col_modality));
            if (!modality.empty() && modality != "x-ray") continue;
        }
        if (!is_frontal_view(cell(col_view))) continue;
        const auto filename = cell(col_file);
        fs::path path = col_folder && !cell(col_folder).empty() ? covid.root / cell(col_folder) / filename
                                                                : covid.root / filename;
        const auto patient = cell(col_patient);
        if (filename.empty() || patient.empty()) {
            result.rejects.push_back({path, "metadata row " + std::to_string(i) + " lacks filename or patient id"});
            continue;
        }
        if (!fs::is_regular_file(path)) {
            result.rejects.push_back({path, "missing image file"});
            continue;
        }
        m.records.push_back({path, "covid/" + patient, covid_label, Split::Train});
    }

    // Pneumonia source: label from the nearest class-named directory.
    std::error_code ec;
    if (!fs::is_directory(pneumonia.root, ec))
        throw DataError("pneumonia source is not a directory: " + pneumonia.root.string());
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(pneumonia.root, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        if (it->is_regular_file() && is_image_file(it->path())) files.push_back(it->path());
    }
    if (ec) throw DataError("cannot walk pneumonia source " + pneumonia.root.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::optional<Finding> finding;
        for (auto dir = file.parent_path(); !finding && dir != pneumonia.root && dir.has_relative_path();
             dir = dir.parent_path()) {
            const auto name = dir.filename().string();
            if (lower(name) == "pneumonia") {
                const auto stem = lower(file.stem().string());
                if (stem.find("bacteria") != std::string::npos) finding = Finding::BacterialPneumonia;
                else if (stem.find("virus") != std::string::npos) finding = Finding::ViralPneumonia;
                else break;
            } else {
                finding = finding_from_dir(name);
            }
        }
        if (!finding) {
            result.rejects.push_back({file, "cannot infer class from directory or file name"});
            continue;
        }
        m.records.push_back({file, "pneumonia/" + pneumonia_patient_id(file), class_index(mode, *finding), Split::Train});
    }

    if (m.records.empty())
        throw DataError("no images found under " + covid.root.string() + " and " + pneumonia.root.string());
    std::sort(m.records.begin(), m.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_path < b.image_path; });
    m.recount();
    return result;
}

}  // namespace cxr
