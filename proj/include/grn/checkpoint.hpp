#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "grn/dataset_io.hpp"
#include "grn/train.hpp"

namespace grn {

// GRNCKPT 1 container: same framing as GRNDATA (magic, manifest line, f32
// payload, FNV-1a 64 checksum). The manifest carries the model geometry and a
// tensor index {name, shape, offset}; the payload holds learnable weights,
// normalization running stats, and class prototypes in index order. Restored
// models reproduce eval-mode outputs to f32 precision. No timestamps or host
// details: the same model always serializes to the same bytes.

inline constexpr const char* kCkptMagic = "GRNCKPT 1";

namespace detail {

inline nlohmann::json config_to_json(const GrnConfig& c) {
    return {
        {"n_groups", c.n_groups},
        {"channels_per_group", c.channels_per_group},
        {"grid_h", c.grid_h},
        {"grid_w", c.grid_w},
        {"input_time", c.input_time},
        {"temporal_kernel", c.temporal_kernel},
        {"temporal_stride3", c.temporal_stride3},
        {"depth_multiplier", c.depth_multiplier},
        {"relation_kernel", c.relation_kernel},
        {"relation_channels_per_group", c.relation_channels_per_group},
        {"pool_window", c.pool_window},
        {"pool_stride", c.pool_stride},
        {"fc_hidden", c.fc_hidden},
        {"n_classes", c.n_classes},
        {"relation_bn", c.relation_bn},
    };
}

inline GrnConfig config_from_json(const nlohmann::json& j) {
    GrnConfig c;
    c.n_groups = j.at("n_groups").get<int>();
    c.channels_per_group = j.at("channels_per_group").get<int>();
    c.grid_h = j.at("grid_h").get<int>();
    c.grid_w = j.at("grid_w").get<int>();
    c.input_time = j.at("input_time").get<int>();
    c.temporal_kernel = j.at("temporal_kernel").get<int>();
    c.temporal_stride3 = j.at("temporal_stride3").get<int>();
    c.depth_multiplier = j.at("depth_multiplier").get<int>();
    c.relation_kernel = j.at("relation_kernel").get<int>();
    c.relation_channels_per_group = j.at("relation_channels_per_group").get<int>();
    c.pool_window = j.at("pool_window").get<int>();
    c.pool_stride = j.at("pool_stride").get<int>();
    c.fc_hidden = j.at("fc_hidden").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    c.relation_bn = j.at("relation_bn").get<bool>();
    c.validate();
    return c;
}

}  // namespace detail

inline void save_checkpoint(const FittedModel& m, const std::string& path) {
    GrnParams& P = const_cast<GrnParams&>(m.params);  // learnable() is non-const
    nlohmann::json manifest;
    manifest["config"] = detail::config_to_json(P.cfg);
    manifest["bn_seen"] = {P.bn1.seen, P.bn2.seen, P.bn3.seen, P.rbn1.seen, P.rbn2.seen};

    std::vector<uint8_t> payload;
    nlohmann::json index = nlohmann::json::array();
    auto append = [&](const std::string& name, const Tensor& t) {
        index.push_back({{"name", name}, {"shape", t.shape}, {"offset", payload.size() / 4}});
        for (double v : t.data) detail::store_f32_le(payload, v);
    };
    for (const auto& p : P.learnable()) append(p.name, *p.tensor);
    for (const auto& p : P.state_tensors()) append(p.name, *p.tensor);

    nlohmann::json proto_labels = nlohmann::json::array();
    for (size_t k = 0; k < m.prototypes.size(); ++k) {
        proto_labels.push_back(m.prototypes[k].class_id);
        append("proto_" + std::to_string(k), m.prototypes[k].embedding);
    }
    manifest["prototype_labels"] = proto_labels;
    manifest["tensors"] = index;
    manifest["payload_bytes"] = payload.size();
    detail::write_all(path, detail::pack_container(kCkptMagic, manifest, payload));
}

inline FittedModel load_checkpoint(const std::string& path) {
    const auto c = detail::unpack_container(detail::read_all(path), kCkptMagic, path);
    FittedModel m(detail::config_from_json(c.manifest.at("config")));
    const auto seen = c.manifest.at("bn_seen").get<std::vector<bool>>();
    if (seen.size() != 5) fail(ErrorKind::Io, path + ": bad bn_seen length");
    m.params.bn1.seen = seen[0];
    m.params.bn2.seen = seen[1];
    m.params.bn3.seen = seen[2];
    m.params.rbn1.seen = seen[3];
    m.params.rbn2.seen = seen[4];

    const auto& index = c.manifest.at("tensors");
    auto read_into = [&](const nlohmann::json& entry, Tensor& t) {
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape != t.shape)
            fail(ErrorKind::Dimension, path + ": tensor '" +
                                           entry.at("name").get<std::string>() +
                                           "' has unexpected shape");
        const size_t off = entry.at("offset").get<size_t>() * 4;
        if (off + t.size() * 4 > c.payload.size())
            fail(ErrorKind::Truncated, path + ": tensor '" +
                                           entry.at("name").get<std::string>() +
                                           "' extends past the payload");
        for (int64_t i = 0; i < t.size(); ++i)
            t.data[size_t(i)] = detail::load_f32_le(c.payload.data() + off + size_t(i) * 4);
    };
    auto find = [&](const std::string& name) -> const nlohmann::json& {
        for (const auto& e : index)
            if (e.at("name").get<std::string>() == name) return e;
        fail(ErrorKind::Io, path + ": missing tensor '" + name + "'");
    };
    for (auto& p : m.params.learnable()) read_into(find(p.name), *p.tensor);
    for (auto& p : m.params.state_tensors()) read_into(find(p.name), *p.tensor);

    const auto proto_labels = c.manifest.at("prototype_labels").get<std::vector<int>>();
    for (size_t k = 0; k < proto_labels.size(); ++k) {
        Prototype pr;
        pr.class_id = proto_labels[k];
        pr.embedding = Tensor(embedding_shape(m.params.cfg));
        read_into(find("proto_" + std::to_string(k)), pr.embedding);
        m.prototypes.push_back(std::move(pr));
    }
    return m;
}

}  // namespace grn
