#include "raptor/persistence.hpp"

#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "raptor/errors.hpp"
#include "raptor/rng.hpp"

namespace raptor {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string checksum_hex(const std::string& payload_dump) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload_dump)));
    return buf;
}

std::string gzip_compress(const std::string& data) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) !=
        Z_OK) {
        throw IoError("gzip: deflateInit2 failed");
    }
    // A fixed header (no mtime, unknown OS) keeps compression reproducible.
    gz_header header{};
    header.os = 255;
    deflateSetHeader(&zs, &header);

    std::string out;
    std::vector<unsigned char> buffer(1 << 16);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    int rc = Z_OK;
    do {
        zs.next_out = buffer.data();
        zs.avail_out = static_cast<uInt>(buffer.size());
        rc = deflate(&zs, Z_FINISH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            deflateEnd(&zs);
            throw IoError("gzip: deflate failed with code " + std::to_string(rc));
        }
        out.append(reinterpret_cast<char*>(buffer.data()), buffer.size() - zs.avail_out);
    } while (rc != Z_STREAM_END);
    deflateEnd(&zs);
    return out;
}

std::string gzip_decompress(const std::string& data, const std::string& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) {
        throw IoError("gzip: inflateInit2 failed");
    }
    std::string out;
    std::vector<unsigned char> buffer(1 << 16);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    int rc = Z_OK;
    do {
        zs.next_out = buffer.data();
        zs.avail_out = static_cast<uInt>(buffer.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw CorruptIndexError(path + ": corrupted gzip stream");
        }
        out.append(reinterpret_cast<char*>(buffer.data()), buffer.size() - zs.avail_out);
    } while (rc != Z_STREAM_END && zs.avail_in > 0);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) {
        throw CorruptIndexError(path + ": truncated gzip stream");
    }
    return out;
}

ordered_json config_to_json(const BuildConfig& config) {
    const ClusteringConfig& c = config.clustering;
    ordered_json clustering = {{"membership_threshold", c.membership_threshold},
                               {"k_max", c.k_max},
                               {"n_neighbors_local", c.n_neighbors_local},
                               {"target_dim", c.target_dim},
                               {"max_recluster_depth", c.max_recluster_depth},
                               {"summarizer_token_threshold", c.summarizer_token_threshold},
                               {"em_max_iters", c.em_max_iters},
                               {"em_tol", c.em_tol},
                               {"covariance_reg", c.covariance_reg},
                               {"n_init", c.n_init},
                               {"umap_epochs", c.umap_epochs}};
    return {{"chunk_budget", config.chunk_budget},
            {"max_layers", config.max_layers},
            {"min_top_nodes", config.min_top_nodes},
            {"seed", config.seed},
            {"max_in_flight", config.max_in_flight},
            {"clustering", std::move(clustering)}};
}

BuildConfig config_from_json(const ordered_json& j) {
    BuildConfig config;
    config.chunk_budget = j.at("chunk_budget").get<std::int64_t>();
    config.max_layers = j.at("max_layers").get<int>();
    config.min_top_nodes = j.at("min_top_nodes").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.max_in_flight = j.at("max_in_flight").get<int>();
    const ordered_json& c = j.at("clustering");
    config.clustering.membership_threshold = c.at("membership_threshold").get<double>();
    config.clustering.k_max = c.at("k_max").get<int>();
    config.clustering.n_neighbors_local = c.at("n_neighbors_local").get<int>();
    config.clustering.target_dim = c.at("target_dim").get<int>();
    config.clustering.max_recluster_depth = c.at("max_recluster_depth").get<int>();
    config.clustering.summarizer_token_threshold =
        c.at("summarizer_token_threshold").get<std::int64_t>();
    config.clustering.em_max_iters = c.at("em_max_iters").get<int>();
    config.clustering.em_tol = c.at("em_tol").get<double>();
    config.clustering.covariance_reg = c.at("covariance_reg").get<double>();
    config.clustering.n_init = c.at("n_init").get<int>();
    config.clustering.umap_epochs = c.at("umap_epochs").get<int>();
    return config;
}

ordered_json tree_to_payload(const Tree& tree) {
    ordered_json payload;
    payload["config"] = config_to_json(tree.config);
    payload["providers"] = {{"embedder_kind", tree.providers.embedder_kind},
                            {"embedding_dim", tree.providers.embedding_dim},
                            {"summarizer_kind", tree.providers.summarizer_kind},
                            {"max_summary_tokens", tree.providers.max_summary_tokens}};
    payload["grouping"] = tree.grouping;
    payload["recency_window"] = tree.recency_window;
    payload["config_fingerprint"] = tree.config_fingerprint;
    payload["provenance"] = tree.provenance;
    payload["layers"] = tree.layers;

    ordered_json nodes = ordered_json::array();
    for (const auto& [id, n] : tree.nodes) {  // std::map iterates in id order
        nodes.push_back({{"id", n.id},
                         {"layer", n.layer},
                         {"text", n.text},
                         {"token_count", n.token_count},
                         {"doc_id", n.doc_id},
                         {"source_offset", n.source_offset},
                         {"children", n.children},
                         {"embedding", n.embedding}});
    }
    payload["nodes"] = std::move(nodes);
    return payload;
}

Tree tree_from_payload(const ordered_json& payload) {
    Tree tree;
    tree.config = config_from_json(payload.at("config"));
    const ordered_json& prov = payload.at("providers");
    tree.providers.embedder_kind = prov.at("embedder_kind").get<std::string>();
    tree.providers.embedding_dim = prov.at("embedding_dim").get<int>();
    tree.providers.summarizer_kind = prov.at("summarizer_kind").get<std::string>();
    tree.providers.max_summary_tokens = prov.at("max_summary_tokens").get<std::int64_t>();
    tree.grouping = payload.at("grouping").get<std::string>();
    tree.recency_window = payload.at("recency_window").get<int>();
    tree.config_fingerprint = payload.at("config_fingerprint").get<std::string>();
    tree.provenance = payload.at("provenance").get<std::vector<std::string>>();
    tree.layers = payload.at("layers").get<std::vector<std::vector<std::int64_t>>>();

    for (const ordered_json& record : payload.at("nodes")) {
        Node n;
        n.id = record.at("id").get<std::int64_t>();
        n.layer = record.at("layer").get<int>();
        n.text = record.at("text").get<std::string>();
        n.token_count = record.at("token_count").get<std::int64_t>();
        n.doc_id = record.at("doc_id").get<std::string>();
        n.source_offset = record.at("source_offset").get<std::int64_t>();
        n.children = record.at("children").get<std::vector<std::int64_t>>();
        n.embedding = record.at("embedding").get<Vector>();
        const std::int64_t id = n.id;
        if (!tree.nodes.emplace(id, std::move(n)).second) {
            throw CorruptIndexError("duplicate node id " + std::to_string(id) + " in index");
        }
    }
    return tree;
}

}  // namespace

void save_tree(const Tree& tree, const std::string& path) {
    validate_tree(tree);

    ordered_json payload = tree_to_payload(tree);
    ordered_json file;
    file["format"] = "raptor-index";
    file["format_version"] = kIndexFormatVersion;
    file["checksum"] = checksum_hex(payload.dump());
    file["payload"] = std::move(payload);

    std::string content = file.dump(2);
    content += '\n';
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) content = gzip_compress(content);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("save_tree: cannot open " + tmp + " for writing: " +
                          std::strerror(errno));
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw IoError("save_tree: failed writing " + tmp + ": " + std::strerror(errno));
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        const std::string why = std::strerror(errno);
        std::remove(tmp.c_str());
        throw IoError("save_tree: cannot rename " + tmp + " to " + path + ": " + why);
    }
}

Tree load_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_tree: cannot open " + path + ": " + std::strerror(errno));
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) {
        throw IoError("load_tree: failed reading " + path);
    }

    if (content.size() >= 2 && static_cast<unsigned char>(content[0]) == 0x1f &&
        static_cast<unsigned char>(content[1]) == 0x8b) {
        content = gzip_decompress(content, path);
    }

    ordered_json file;
    try {
        file = ordered_json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptIndexError(path + ": not a valid index file: " + e.what());
    }

    try {
        if (!file.contains("format_version") || !file.at("format_version").is_number_integer()) {
            throw CorruptIndexError(path + ": missing format_version");
        }
        const int version = file.at("format_version").get<int>();
        if (version != kIndexFormatVersion) {
            throw UnsupportedVersionError(path + ": index format version " +
                                          std::to_string(version) + " is not supported (this "
                                          "build reads version " +
                                          std::to_string(kIndexFormatVersion) + ")");
        }
        const ordered_json& payload = file.at("payload");
        const std::string expected = file.at("checksum").get<std::string>();
        const std::string actual = checksum_hex(payload.dump());
        if (expected != actual) {
            throw CorruptIndexError(path + ": checksum mismatch (stored " + expected +
                                    ", computed " + actual + ")");
        }
        Tree tree = tree_from_payload(payload);
        validate_tree(tree);
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptIndexError(path + ": malformed index content: " + e.what());
    }
}

}  // namespace raptor
