#pragma once

#include "uwbdar/maps.hpp"
#include "uwbdar/model.hpp"
#include "uwbdar/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwbdar::io {

// Distinct, named failure modes for the binary containers.
struct BadMagic : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Truncated : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownKind : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionUnsupported : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kSampleVersion = 1;
inline constexpr std::uint16_t kBundleVersion = 1;

/// Sample payload kinds; 0 is the raw pulse matrix, the rest are domain maps.
enum class SampleKind : std::uint8_t {
    Pulse = 0,
    RangeTime = 1,
    FrequencyTime = 2,
    RangeDoppler = 3,
};

/// In-memory form of one .uwbs container: header fields plus a row-major
/// float32 payload held as doubles.
struct SampleRecord {
    SampleKind kind = SampleKind::Pulse;
    Matrix data;
    Activity label = Activity::Relax;
    std::uint16_t subject_id = 0;
};

/// Layout: "UWBS" | u16 version | u32 rows | u32 cols | u8 kind |
/// u16 label | u16 subject | rows*cols float32, all little-endian row-major.
void save_sample(const SampleRecord& sample, const std::string& path);
SampleRecord load_sample(const std::string& path);

void save_pulse_matrix(const PulseMatrix& m, const std::string& path);
PulseMatrix load_pulse_matrix(const std::string& path);

// --- manifest ---------------------------------------------------------------

struct ManifestEntry {
    std::string path;
    Activity label = Activity::Relax;
    int subject_id = 0;
    double frame_rate = 100.0;
    std::string notes;
};

/// JSON-lines manifest; load verifies every listed path exists and every
/// label parses.
void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> load_manifest(const std::string& path);

std::vector<PulseMatrix> load_dataset(const std::string& manifest_path);
std::vector<ManifestEntry> save_dataset(const std::vector<PulseMatrix>& dataset,
                                        const std::string& directory);

// --- weight bundles ------------------------------------------------------------

/// Layout: "UWBB" | u16 version | u32 header length | JSON header (dims,
/// provenance, block index with names and shapes) | concatenated float64
/// blocks. Round-trips bit-exactly.
void save_bundle(const model::PretrainedBundle& bundle, const std::string& path);
model::PretrainedBundle load_bundle(const std::string& path);

/// Same container, holding a trained model's full parameter list keyed by
/// parameter name. The model is rebuilt from its config first; loading fills
/// the matching blocks.
void save_model_weights(model::ActivityModel& net, const std::string& path);
void load_model_weights(model::ActivityModel& net, const std::string& path);

// --- external-recording ingestion ------------------------------------------------

/// Declares the on-disk layout of an externally obtained recording directory;
/// read from JSON. The key set is documented in the README.
struct IngestMapping {
    std::string pattern = ".bin"; // filename suffix selecting recordings
    Index rows = 178;
    Index cols = 500;
    std::string dtype = "f32";   // "f32" or "f64"
    std::string order = "row";   // "row" or "col" major
    double frame_rate = 100.0;
    // filename substring (case-insensitive) -> activity name
    std::vector<std::pair<std::string, std::string>> label_map;
    // subject id parsed from the parent directory name when it contains an
    // integer; fallback id otherwise
    int default_subject = 0;
};

IngestMapping load_ingest_mapping(const std::string& path);

struct IngestResult {
    std::vector<ManifestEntry> manifest;
    std::vector<std::string> skipped; // "path: reason" per skipped file
};

/// Convert recordings under `directory` into sample containers in `out_dir`,
/// writing manifest.jsonl and ingest_log.txt. Unmapped labels and unreadable
/// files are logged and skipped, not fatal.
IngestResult ingest_directory(const std::string& directory, const IngestMapping& mapping,
                              const std::string& out_dir);

} // namespace uwbdar::io
