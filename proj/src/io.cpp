#include "uwbdar/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace uwbdar::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u16(std::ostream& out, std::uint16_t v) {
    const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(bytes, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

std::uint16_t get_u16(std::istream& in) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

void put_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32_le(std::istream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void save_sample(const SampleRecord& sample, const std::string& path) {
    if (sample.data.rows() < 1 || sample.data.cols() < 1)
        throw std::invalid_argument("save_sample: empty payload");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_sample: cannot write " + path);
    out.write("UWBS", 4);
    put_u16(out, kSampleVersion);
    put_u32(out, static_cast<std::uint32_t>(sample.data.rows()));
    put_u32(out, static_cast<std::uint32_t>(sample.data.cols()));
    out.put(static_cast<char>(sample.kind));
    put_u16(out, static_cast<std::uint16_t>(sample.label));
    put_u16(out, sample.subject_id);
    for (Index i = 0; i < sample.data.rows(); ++i)
        for (Index j = 0; j < sample.data.cols(); ++j)
            put_f32_le(out, static_cast<float>(sample.data(i, j)));
    if (!out) throw std::runtime_error("save_sample: write failed for " + path);
}

SampleRecord load_sample(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_sample: cannot read " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() < 4) throw Truncated("load_sample: file shorter than the header: " + path);
    if (std::memcmp(magic, "UWBS", 4) != 0)
        throw BadMagic("load_sample: bad magic in " + path);
    const std::uint16_t version = get_u16(in);
    if (version != kSampleVersion)
        throw VersionUnsupported("load_sample: version " + std::to_string(version) +
                                 " unsupported in " + path);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    const int kind = in.get();
    const std::uint16_t label = get_u16(in);
    const std::uint16_t subject = get_u16(in);
    if (!in) throw Truncated("load_sample: header truncated in " + path);
    if (kind < 0 || kind > 3)
        throw UnknownKind("load_sample: kind code " + std::to_string(kind) + " in " + path);
    if (label >= kNumActivities)
        throw UnknownKind("load_sample: label code " + std::to_string(label) + " in " + path);

    SampleRecord rec;
    rec.kind = static_cast<SampleKind>(kind);
    rec.label = static_cast<Activity>(label);
    rec.subject_id = subject;
    rec.data.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) {
            rec.data(i, j) = static_cast<double>(get_f32_le(in));
            if (!in)
                throw Truncated("load_sample: payload truncated at element " +
                                std::to_string(i * cols + j) + " in " + path);
        }
    return rec;
}

void save_pulse_matrix(const PulseMatrix& m, const std::string& path) {
    SampleRecord rec;
    rec.kind = SampleKind::Pulse;
    rec.data = m.data;
    rec.label = m.label;
    rec.subject_id = static_cast<std::uint16_t>(m.subject_id);
    save_sample(rec, path);
}

PulseMatrix load_pulse_matrix(const std::string& path) {
    SampleRecord rec = load_sample(path);
    PulseMatrix m;
    m.data = rec.data;
    m.label = rec.label;
    m.subject_id = rec.subject_id;
    return m;
}

// --- manifest ---------------------------------------------------------------

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot write " + path);
    for (const auto& e : entries) {
        json j;
        j["path"] = e.path;
        j["label"] = to_string(e.label);
        j["subject"] = e.subject_id;
        j["frame_rate"] = e.frame_rate;
        if (!e.notes.empty()) j["notes"] = e.notes;
        out << j.dump() << '\n';
    }
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot read " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestEntry e;
        e.path = j.at("path").get<std::string>();
        const auto label = activity_from_string(j.at("label").get<std::string>());
        if (!label)
            throw std::invalid_argument("load_manifest: unknown label in " + path + ": " + line);
        e.label = *label;
        e.subject_id = j.at("subject").get<int>();
        e.frame_rate = j.value("frame_rate", 100.0);
        e.notes = j.value("notes", std::string());
        const fs::path full = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
        if (!fs::exists(full))
            throw std::invalid_argument("load_manifest: listed path missing: " + full.string());
        e.path = full.string();
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<PulseMatrix> load_dataset(const std::string& manifest_path) {
    std::vector<PulseMatrix> out;
    for (const auto& e : load_manifest(manifest_path)) {
        PulseMatrix m = load_pulse_matrix(e.path);
        m.frame_rate = e.frame_rate;
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<ManifestEntry> save_dataset(const std::vector<PulseMatrix>& dataset,
                                        const std::string& directory) {
    fs::create_directories(directory);
    std::vector<ManifestEntry> entries;
    char name[64];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        std::snprintf(name, sizeof(name), "sample_%05zu.uwbs", i);
        const fs::path p = fs::path(directory) / name;
        save_pulse_matrix(dataset[i], p.string());
        ManifestEntry e;
        e.path = name;
        e.label = dataset[i].label;
        e.subject_id = dataset[i].subject_id;
        e.frame_rate = dataset[i].frame_rate;
        entries.push_back(std::move(e));
    }
    save_manifest(entries, (fs::path(directory) / "manifest.jsonl").string());
    return entries;
}

// --- weight bundles ------------------------------------------------------------

namespace {

struct BlockRef {
    std::string name;
    double* data;
    Index size;
    std::vector<Index> shape;
};

void push_block(std::vector<BlockRef>& out, const std::string& name, Matrix& m) {
    out.push_back({name, m.data(), m.size(), {m.rows(), m.cols()}});
}

void push_block(std::vector<BlockRef>& out, const std::string& name, Vector& v) {
    out.push_back({name, v.data(), v.size(), {v.size()}});
}

// Exhaustive, ordered list of every tensor in a bundle. Serialization and
// deserialization both traverse this list, so the order is the format.
std::vector<BlockRef> bundle_blocks(model::PretrainedBundle& b) {
    std::vector<BlockRef> blocks;
    push_block(blocks, "patch16.W", b.patch16.weights);
    push_block(blocks, "patch16.b", b.patch16.bias);
    push_block(blocks, "pev.grid", b.pev.grid);
    push_block(blocks, "pev.cls", b.pev.class_token_pev);
    push_block(blocks, "class_token", b.class_token);
    for (std::size_t i = 0; i < b.encoder.blocks.size(); ++i) {
        auto& blk = b.encoder.blocks[i];
        const std::string p = "encoder.block" + std::to_string(i);
        push_block(blocks, p + ".ln1.gamma", blk.ln1.gamma);
        push_block(blocks, p + ".ln1.beta", blk.ln1.beta);
        push_block(blocks, p + ".attn.qkv.W", blk.attn.qkv.W);
        push_block(blocks, p + ".attn.qkv.b", blk.attn.qkv.b);
        push_block(blocks, p + ".attn.proj.W", blk.attn.proj.W);
        push_block(blocks, p + ".attn.proj.b", blk.attn.proj.b);
        push_block(blocks, p + ".ln2.gamma", blk.ln2.gamma);
        push_block(blocks, p + ".ln2.beta", blk.ln2.beta);
        push_block(blocks, p + ".mlp.fc1.W", blk.mlp.fc1.W);
        push_block(blocks, p + ".mlp.fc1.b", blk.mlp.fc1.b);
        push_block(blocks, p + ".mlp.fc2.W", blk.mlp.fc2.W);
        push_block(blocks, p + ".mlp.fc2.b", blk.mlp.fc2.b);
    }
    return blocks;
}

} // namespace

void save_bundle(const model::PretrainedBundle& bundle, const std::string& path) {
    model::PretrainedBundle copy = bundle;
    auto blocks = bundle_blocks(copy);

    json header;
    header["d"] = bundle.cfg.d;
    header["layers"] = bundle.cfg.layers;
    header["heads"] = bundle.cfg.heads;
    header["mlp_ratio"] = bundle.cfg.mlp_ratio;
    header["k_original"] = adapt::kOriginalPatch;
    header["provenance"] = bundle.provenance;
    for (const auto& blk : blocks) {
        json jb;
        jb["name"] = blk.name;
        jb["shape"] = blk.shape;
        header["blocks"].push_back(jb);
    }
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_bundle: cannot write " + path);
    out.write("UWBB", 4);
    put_u16(out, kBundleVersion);
    put_u32(out, static_cast<std::uint32_t>(htext.size()));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& blk : blocks)
        out.write(reinterpret_cast<const char*>(blk.data),
                  static_cast<std::streamsize>(blk.size * sizeof(double)));
    if (!out) throw std::runtime_error("save_bundle: write failed for " + path);
}

model::PretrainedBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_bundle: cannot read " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() < 4) throw Truncated("load_bundle: file shorter than the header: " + path);
    if (std::memcmp(magic, "UWBB", 4) != 0) throw BadMagic("load_bundle: bad magic in " + path);
    const std::uint16_t version = get_u16(in);
    if (version != kBundleVersion)
        throw VersionUnsupported("load_bundle: version " + std::to_string(version) +
                                 " unsupported in " + path);
    const std::uint32_t hlen = get_u32(in);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw Truncated("load_bundle: header truncated in " + path);
    json header = json::parse(htext);

    model::EncoderConfig cfg;
    cfg.d = header.at("d").get<int>();
    cfg.layers = header.at("layers").get<int>();
    cfg.heads = header.at("heads").get<int>();
    cfg.mlp_ratio = header.at("mlp_ratio").get<double>();

    model::PretrainedBundle bundle = model::random_bundle(cfg, 0);
    bundle.provenance = header.value("provenance", "external");
    auto blocks = bundle_blocks(bundle);

    const auto& jblocks = header.at("blocks");
    if (jblocks.size() != blocks.size())
        throw std::invalid_argument("load_bundle: block count mismatch in " + path);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& jb = jblocks[i];
        if (jb.at("name").get<std::string>() != blocks[i].name)
            throw std::invalid_argument("load_bundle: block order mismatch at " + blocks[i].name);
        const auto shape = jb.at("shape").get<std::vector<Index>>();
        Index total = 1;
        for (Index s : shape) total *= s;
        if (shape != blocks[i].shape || total != blocks[i].size)
            throw std::invalid_argument("load_bundle: shape mismatch for " + blocks[i].name);
        in.read(reinterpret_cast<char*>(blocks[i].data),
                static_cast<std::streamsize>(blocks[i].size * sizeof(double)));
        if (!in) throw Truncated("load_bundle: payload truncated at " + blocks[i].name);
    }
    return bundle;
}

void save_model_weights(model::ActivityModel& net, const std::string& path) {
    auto params = net.params();
    json header;
    header["kind"] = "model-weights";
    for (const auto& p : params) {
        json jb;
        jb["name"] = p.name;
        jb["shape"] = std::vector<Index>{p.size};
        header["blocks"].push_back(jb);
    }
    const std::string htext = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model_weights: cannot write " + path);
    out.write("UWBB", 4);
    put_u16(out, kBundleVersion);
    put_u32(out, static_cast<std::uint32_t>(htext.size()));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.value),
                  static_cast<std::streamsize>(p.size * sizeof(double)));
    if (!out) throw std::runtime_error("save_model_weights: write failed for " + path);
}

void load_model_weights(model::ActivityModel& net, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model_weights: cannot read " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() < 4) throw Truncated("load_model_weights: truncated header in " + path);
    if (std::memcmp(magic, "UWBB", 4) != 0)
        throw BadMagic("load_model_weights: bad magic in " + path);
    const std::uint16_t version = get_u16(in);
    if (version != kBundleVersion)
        throw VersionUnsupported("load_model_weights: version " + std::to_string(version));
    const std::uint32_t hlen = get_u32(in);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw Truncated("load_model_weights: header truncated in " + path);
    json header = json::parse(htext);
    if (header.value("kind", "") != "model-weights")
        throw std::invalid_argument("load_model_weights: not a model-weights file: " + path);

    auto params = net.params();
    const auto& jblocks = header.at("blocks");
    if (jblocks.size() != params.size())
        throw std::invalid_argument(
            "load_model_weights: block count does not match the model configuration");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (jblocks[i].at("name").get<std::string>() != params[i].name)
            throw std::invalid_argument("load_model_weights: block mismatch at " + params[i].name);
        in.read(reinterpret_cast<char*>(params[i].value),
                static_cast<std::streamsize>(params[i].size * sizeof(double)));
        if (!in) throw Truncated("load_model_weights: payload truncated at " + params[i].name);
    }
}

// --- ingestion -------------------------------------------------------------------

IngestMapping load_ingest_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_ingest_mapping: cannot read " + path);
    json j;
    in >> j;
    IngestMapping m;
    m.pattern = j.value("pattern", m.pattern);
    m.rows = j.value("rows", m.rows);
    m.cols = j.value("cols", m.cols);
    m.dtype = j.value("dtype", m.dtype);
    m.order = j.value("order", m.order);
    m.frame_rate = j.value("frame_rate", m.frame_rate);
    m.default_subject = j.value("default_subject", 0);
    if (j.contains("label_map"))
        for (const auto& [key, value] : j.at("label_map").items())
            m.label_map.emplace_back(key, value.get<std::string>());
    if (m.dtype != "f32" && m.dtype != "f64")
        throw std::invalid_argument("ingest mapping: dtype must be f32 or f64");
    if (m.order != "row" && m.order != "col")
        throw std::invalid_argument("ingest mapping: order must be row or col");
    return m;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

int subject_from_dirname(const fs::path& file, int fallback) {
    std::string digits;
    for (char c : file.parent_path().filename().string())
        if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
    return digits.empty() ? fallback : std::stoi(digits);
}

bool read_raw(const fs::path& file, const IngestMapping& m, Matrix& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return false;
    const std::size_t elem = (m.dtype == "f32") ? 4 : 8;
    const std::size_t need = static_cast<std::size_t>(m.rows * m.cols) * elem;
    std::vector<char> buffer(need);
    in.read(buffer.data(), static_cast<std::streamsize>(need));
    if (static_cast<std::size_t>(in.gcount()) != need) return false;
    out.resize(m.rows, m.cols);
    for (Index i = 0; i < m.rows; ++i)
        for (Index j = 0; j < m.cols; ++j) {
            const Index idx = (m.order == "row") ? i * m.cols + j : j * m.rows + i;
            if (m.dtype == "f32") {
                float v;
                std::memcpy(&v, buffer.data() + idx * 4, 4);
                out(i, j) = static_cast<double>(v);
            } else {
                double v;
                std::memcpy(&v, buffer.data() + idx * 8, 8);
                out(i, j) = v;
            }
        }
    return out.allFinite();
}

} // namespace

IngestResult ingest_directory(const std::string& directory, const IngestMapping& mapping,
                              const std::string& out_dir) {
    if (!fs::exists(directory))
        throw std::invalid_argument("ingest: directory does not exist: " + directory);
    fs::create_directories(out_dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().string().ends_with(mapping.pattern))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    IngestResult result;
    int converted = 0;
    for (const auto& file : files) {
        const std::string stem = lower(file.filename().string());
        std::string label_name;
        for (const auto& [key, value] : mapping.label_map)
            if (stem.find(lower(key)) != std::string::npos) {
                label_name = value;
                break;
            }
        if (label_name.empty()) {
            result.skipped.push_back(file.string() + ": no label mapping matched");
            continue;
        }
        const auto label = activity_from_string(label_name);
        if (!label) {
            result.skipped.push_back(file.string() + ": unmapped label '" + label_name + "'");
            continue;
        }
        Matrix data;
        if (!read_raw(file, mapping, data)) {
            result.skipped.push_back(file.string() + ": unreadable or wrong size");
            continue;
        }
        PulseMatrix m;
        m.data = data.cast<float>().cast<double>();
        m.label = *label;
        m.subject_id = subject_from_dirname(file, mapping.default_subject);
        m.frame_rate = mapping.frame_rate;

        char name[64];
        std::snprintf(name, sizeof(name), "ingest_%05d.uwbs", converted++);
        save_pulse_matrix(m, (fs::path(out_dir) / name).string());
        ManifestEntry e;
        e.path = name;
        e.label = m.label;
        e.subject_id = m.subject_id;
        e.frame_rate = m.frame_rate;
        e.notes = "ingested from " + file.string();
        result.manifest.push_back(std::move(e));
    }
    save_manifest(result.manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    std::ofstream log(fs::path(out_dir) / "ingest_log.txt");
    log << "converted " << converted << " file(s), skipped " << result.skipped.size() << "\n";
    for (const auto& s : result.skipped) log << "skip " << s << "\n";
    return result;
}

} // namespace uwbdar::io
