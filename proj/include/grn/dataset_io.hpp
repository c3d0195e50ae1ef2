#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grn/data.hpp"

namespace grn {

// GRNDATA 1 container:
//   "GRNDATA 1\n"
//   <manifest JSON, one line>\n
//   <payload: f32 little-endian>
//   <checksum: 16 lowercase hex chars of FNV-1a 64 over the payload>\n
//
// kind "grid": trials are 5×5×T epochs; kind "raw": trials are C×T records.

namespace detail {

inline std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + path);
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return std::string(buf, 16);
}

struct Container {
    nlohmann::json manifest;
    std::vector<uint8_t> payload;
};

inline std::string pack_container(const std::string& magic, const nlohmann::json& manifest,
                                  const std::vector<uint8_t>& payload) {
    std::string out = magic + "\n" + manifest.dump() + "\n";
    out.append(reinterpret_cast<const char*>(payload.data()), payload.size());
    out += hex64(fnv1a64(payload.data(), payload.size()));
    out += '\n';
    return out;
}

inline Container unpack_container(const std::string& bytes, const std::string& magic,
                                  const std::string& what) {
    const size_t nl1 = bytes.find('\n');
    if (nl1 == std::string::npos) fail(ErrorKind::Truncated, what + ": missing header");
    const std::string got_magic = bytes.substr(0, nl1);
    const size_t sp = magic.rfind(' ');
    const std::string stem = magic.substr(0, sp);
    if (got_magic.substr(0, stem.size()) != stem)
        fail(ErrorKind::Io, what + ": not a " + stem + " file");
    if (got_magic != magic)
        fail(ErrorKind::Version, what + ": unsupported version '" + got_magic + "', expected '" +
                                      magic + "'");
    const size_t nl2 = bytes.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) fail(ErrorKind::Truncated, what + ": missing manifest");
    Container c;
    try {
        c.manifest = nlohmann::json::parse(bytes.substr(nl1 + 1, nl2 - nl1 - 1));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, what + ": bad manifest: " + e.what());
    }
    if (!c.manifest.contains("payload_bytes"))
        fail(ErrorKind::Io, what + ": manifest lacks payload_bytes");
    const size_t n = c.manifest["payload_bytes"].get<size_t>();
    const size_t payload_at = nl2 + 1;
    // payload + 16 hex chars + trailing newline
    if (bytes.size() < payload_at + n + 17)
        fail(ErrorKind::Truncated, what + ": payload truncated (have " +
                                       std::to_string(bytes.size() - payload_at) + " of " +
                                       std::to_string(n + 17) + " bytes)");
    c.payload.assign(bytes.begin() + std::ptrdiff_t(payload_at),
                     bytes.begin() + std::ptrdiff_t(payload_at + n));
    const std::string want = bytes.substr(payload_at + n, 16);
    const std::string have = hex64(fnv1a64(c.payload.data(), n));
    if (want != have)
        fail(ErrorKind::Checksum,
             what + ": checksum mismatch (stored " + want + ", computed " + have + ")");
    return c;
}

}  // namespace detail

inline constexpr const char* kDataMagic = "GRNDATA 1";

inline void save_grid_dataset(const GridDataset& ds, const std::string& path) {
    if (ds.trials.empty()) fail(ErrorKind::Parameter, "save_grid_dataset: empty dataset");
    const auto& shape = ds.trials.front().grid.shape;
    nlohmann::json m;
    m["kind"] = "grid";
    m["fs"] = ds.fs;
    m["n_classes"] = ds.n_classes;
    m["class_names"] = ds.class_names;
    m["trial_shape"] = shape;
    m["n_trials"] = ds.trials.size();
    m["provenance"] = ds.provenance;
    std::vector<int> labels;
    std::vector<uint8_t> payload;
    payload.reserve(ds.trials.size() * ds.trials.front().grid.size() * 4);
    for (const auto& t : ds.trials) {
        if (t.grid.shape != shape)
            fail(ErrorKind::Dimension, "save_grid_dataset: inconsistent trial shapes");
        labels.push_back(t.label);
        for (double v : t.grid.data) detail::store_f32_le(payload, v);
    }
    m["labels"] = labels;
    m["payload_bytes"] = payload.size();
    detail::write_all(path, detail::pack_container(kDataMagic, m, payload));
}

inline GridDataset load_grid_dataset(const std::string& path) {
    const auto c = detail::unpack_container(detail::read_all(path), kDataMagic, path);
    if (c.manifest.value("kind", "") != "grid")
        fail(ErrorKind::Io, path + ": expected kind 'grid', got '" +
                                c.manifest.value("kind", "?") + "'");
    GridDataset ds;
    ds.fs = c.manifest["fs"].get<double>();
    ds.n_classes = c.manifest["n_classes"].get<int>();
    ds.class_names = c.manifest["class_names"].get<std::vector<std::string>>();
    ds.provenance = c.manifest.value("provenance", "");
    const auto shape = c.manifest["trial_shape"].get<std::vector<int>>();
    const auto labels = c.manifest["labels"].get<std::vector<int>>();
    const size_t n_trials = c.manifest["n_trials"].get<size_t>();
    if (labels.size() != n_trials)
        fail(ErrorKind::Io, path + ": label count disagrees with n_trials");
    int64_t per_trial = 1;
    for (int d : shape) per_trial *= d;
    if (c.payload.size() != n_trials * size_t(per_trial) * 4)
        fail(ErrorKind::Truncated, path + ": payload size disagrees with manifest shape");
    const uint8_t* p = c.payload.data();
    for (size_t i = 0; i < n_trials; ++i) {
        GridEpoch e;
        e.label = labels[i];
        e.fs = ds.fs;
        e.grid = Tensor(shape);
        for (int64_t j = 0; j < per_trial; ++j, p += 4) e.grid.data[size_t(j)] = detail::load_f32_le(p);
        ds.trials.push_back(std::move(e));
    }
    return ds;
}

inline void save_raw_dataset(const RawDataset& ds, const std::string& path) {
    if (ds.trials.empty()) fail(ErrorKind::Parameter, "save_raw_dataset: empty dataset");
    const auto& shape = ds.trials.front().samples.shape;
    nlohmann::json m;
    m["kind"] = "raw";
    m["fs"] = ds.fs;
    m["n_decodable"] = ds.n_decodable;
    m["channel_names"] = ds.channel_names;
    m["class_names"] = ds.class_names;
    m["trial_shape"] = shape;
    m["n_trials"] = ds.trials.size();
    m["provenance"] = ds.provenance;
    std::vector<int> labels;
    std::vector<uint8_t> payload;
    payload.reserve(ds.trials.size() * ds.trials.front().samples.size() * 4);
    for (const auto& t : ds.trials) {
        if (t.samples.shape != shape)
            fail(ErrorKind::Dimension, "save_raw_dataset: inconsistent trial shapes");
        labels.push_back(t.label);
        for (double v : t.samples.data) detail::store_f32_le(payload, v);
    }
    m["labels"] = labels;
    m["payload_bytes"] = payload.size();
    detail::write_all(path, detail::pack_container(kDataMagic, m, payload));
}

inline RawDataset load_raw_dataset(const std::string& path) {
    const auto c = detail::unpack_container(detail::read_all(path), kDataMagic, path);
    if (c.manifest.value("kind", "") != "raw")
        fail(ErrorKind::Io, path + ": expected kind 'raw', got '" +
                                c.manifest.value("kind", "?") + "'");
    RawDataset ds;
    ds.fs = c.manifest["fs"].get<double>();
    ds.n_decodable = c.manifest.value("n_decodable", 0);
    ds.channel_names = c.manifest["channel_names"].get<std::vector<std::string>>();
    ds.class_names = c.manifest["class_names"].get<std::vector<std::string>>();
    ds.provenance = c.manifest.value("provenance", "");
    const auto shape = c.manifest["trial_shape"].get<std::vector<int>>();
    const auto labels = c.manifest["labels"].get<std::vector<int>>();
    const size_t n_trials = c.manifest["n_trials"].get<size_t>();
    if (labels.size() != n_trials)
        fail(ErrorKind::Io, path + ": label count disagrees with n_trials");
    int64_t per_trial = 1;
    for (int d : shape) per_trial *= d;
    if (c.payload.size() != n_trials * size_t(per_trial) * 4)
        fail(ErrorKind::Truncated, path + ": payload size disagrees with manifest shape");
    const uint8_t* p = c.payload.data();
    for (size_t i = 0; i < n_trials; ++i) {
        RawTrial t;
        t.label = labels[i];
        t.samples = Tensor(shape);
        for (int64_t j = 0; j < per_trial; ++j, p += 4)
            t.samples.data[size_t(j)] = detail::load_f32_le(p);
        ds.trials.push_back(std::move(t));
    }
    return ds;
}

}  // namespace grn
