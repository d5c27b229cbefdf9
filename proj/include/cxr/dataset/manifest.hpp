#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/core/classes.hpp"

namespace cxr {

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ImageRecord {
    std::filesystem::path image_path;
    std::string patient_id;
    int label = 0;  // index into DatasetManifest::classes
    Split split = Split::Train;

    bool operator==(const ImageRecord&) const = default;
};

/// Per-class image counts indexed by Split.
using SplitCounts = std::array<std::size_t, 3>;

struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<ImageRecord> records;
    std::vector<SplitCounts> class_counts;

    /// Rebuilds class_counts from records.
    void recount();

    /// Throws DataError on the first broken invariant: unknown label, empty patient id,
    /// a patient spread over several splits, or stale class_counts.
    void validate() const;

    std::vector<ImageRecord> records_in(Split split) const;
};

std::vector<SplitCounts> count_by_class(const std::vector<ImageRecord>& records, std::size_t num_classes);

/// Tab-separated table with header `image_path patient_id label split`.
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);

/// `classes` fixes the label space; a label outside it is a DataError.
DatasetManifest read_manifest(std::istream& in, const std::vector<std::string>& classes);
DatasetManifest load_manifest(const std::filesystem::path& file, const std::vector<std::string>& classes);

/// Split summary laid out like a sample-wise split table: one row per split, one column per class plus total.
std::string format_split_table(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Ingestion from the two public sources.

/// COVID source: dataset root plus its metadata table. Needs columns for patient id,
/// finding, view and filename; `folder` and `modality` are used when present.
struct CovidSource {
    std::filesystem::path root;
    std::filesystem::path metadata;
};

/// Pneumonia source: a class-named directory tree (NORMAL, PNEUMONIA, BACTERIA, VIRUS),
/// optionally nested under split folders.
struct PneumoniaSource {
    std::filesystem::path root;
};

struct Reject {
    std::filesystem::path path;
    std::string reason;
};

struct IngestResult {
    DatasetManifest manifest;
    std::vector<Reject> rejects;
};

/// Every accepted image becomes a train-candidate record; split_by_patient assigns the real split.
/// Missing files are collected into rejects. Unreadable metadata or an empty result throws DataError.
IngestResult build_manifest(const CovidSource& covid, const PneumoniaSource& pneumonia, ClassMode mode);

bool is_frontal_view(std::string_view view);

/// personN_bacteria_M.jpeg -> personN; IM-0115-0001.jpeg -> IM-0115; otherwise the stem.
std::string pneumonia_patient_id(const std::filesystem::path& file);

void write_rejects(std::ostream& out, const std::vector<Reject>& rejects);

}  // namespace cxr
