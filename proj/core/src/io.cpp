#include "lila/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace lila::io {
namespace {

struct LineReader {
    std::string_view text;
    std::size_t pos = 0;
    long line_no = 0;

    // Next line that carries content, with comments ('#') stripped.
    std::optional<std::string_view> next() {
        while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string_view::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            return line.substr(first, last - first + 1);
        }
        return std::nullopt;
    }
};

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view tok, long line_no) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError("non-numeric token '" + std::string(tok) + "'", line_no);
    return v;
}

long parse_long(std::string_view tok, long line_no) {
    long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError("non-integer token '" + std::string(tok) + "'", line_no);
    return v;
}

}  // namespace

geo::TriangleMesh parse_off(std::string_view text) {
    LineReader reader{text};
    auto line = reader.next();
    if (!line) throw ParseError("empty OFF input", reader.line_no);

    std::vector<std::string_view> counts;
    if (line->substr(0, 3) == "OFF") {
        // Header may carry the counts on the same line ("OFF 8 6 0").
        const auto rest = tokenize(line->substr(3));
        if (!rest.empty()) {
            counts = rest;
        } else {
            line = reader.next();
            if (!line) throw ParseError("missing OFF counts line", reader.line_no);
            counts = tokenize(*line);
        }
    } else {
        counts = tokenize(*line);
    }
    if (counts.size() < 2) throw ParseError("malformed OFF counts line", reader.line_no);
    const long n_vertices = parse_long(counts[0], reader.line_no);
    const long n_faces = parse_long(counts[1], reader.line_no);
    if (n_vertices < 0 || n_faces < 0)
        throw ParseError("negative count in OFF header", reader.line_no);

    geo::TriangleMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(n_vertices));
    for (long i = 0; i < n_vertices; ++i) {
        line = reader.next();
        if (!line) throw ParseError("truncated OFF: missing vertex", reader.line_no);
        const auto toks = tokenize(*line);
        if (toks.size() < 3) throw ParseError("vertex line needs 3 coordinates", reader.line_no);
        mesh.vertices.push_back({parse_double(toks[0], reader.line_no),
                                 parse_double(toks[1], reader.line_no),
                                 parse_double(toks[2], reader.line_no)});
    }
    for (long i = 0; i < n_faces; ++i) {
        line = reader.next();
        if (!line) throw ParseError("truncated OFF: missing face", reader.line_no);
        const auto toks = tokenize(*line);
        if (toks.empty()) throw ParseError("empty face line", reader.line_no);
        const long arity = parse_long(toks[0], reader.line_no);
        if (arity < 3) throw ParseError("face needs at least 3 vertices", reader.line_no);
        if (static_cast<long>(toks.size()) < arity + 1)
            throw ParseError("face line shorter than its vertex count", reader.line_no);
        std::vector<std::uint32_t> poly;
        poly.reserve(static_cast<std::size_t>(arity));
        for (long k = 1; k <= arity; ++k) {
            const long idx = parse_long(toks[static_cast<std::size_t>(k)], reader.line_no);
            if (idx < 0 || idx >= n_vertices)
                throw ParseError("face index " + std::to_string(idx) + " out of range",
                                 reader.line_no);
            poly.push_back(static_cast<std::uint32_t>(idx));
        }
        for (std::size_t k = 1; k + 1 < poly.size(); ++k)
            mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
    return mesh;
}

geo::RawPointCloud parse_xyz(std::string_view text) {
    LineReader reader{text};
    geo::RawPointCloud cloud;
    while (auto line = reader.next()) {
        const auto toks = tokenize(*line);
        if (toks.size() < 3) throw ParseError("expected at least 3 coordinates", reader.line_no);
        cloud.points.push_back({parse_double(toks[0], reader.line_no),
                                parse_double(toks[1], reader.line_no),
                                parse_double(toks[2], reader.line_no)});
    }
    cloud.validate();
    return cloud;
}

geo::RawPointCloud parse_ply_ascii(std::string_view text) {
    LineReader reader{text};
    auto line = reader.next();
    if (!line || *line != "ply") throw ParseError("missing 'ply' magic", reader.line_no);

    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> properties;
    };
    std::vector<Element> elements;
    bool ascii = false;
    while ((line = reader.next())) {
        const auto toks = tokenize(*line);
        if (toks.empty()) continue;
        if (toks[0] == "format") {
            if (toks.size() < 2 || toks[1] != "ascii")
                throw ParseError("only ASCII PLY is supported", reader.line_no);
            ascii = true;
        } else if (toks[0] == "element") {
            if (toks.size() < 3) throw ParseError("malformed element line", reader.line_no);
            elements.push_back({std::string(toks[1]), parse_long(toks[2], reader.line_no), {}});
        } else if (toks[0] == "property") {
            if (elements.empty()) throw ParseError("property before element", reader.line_no);
            if (toks.size() < 2) throw ParseError("malformed property line", reader.line_no);
            elements.back().properties.push_back(std::string(toks.back()));
        } else if (toks[0] == "end_header") {
            break;
        } else if (toks[0] == "comment" || toks[0] == "obj_info") {
            continue;
        }
    }
    if (!line) throw ParseError("missing end_header", reader.line_no);
    if (!ascii) throw ParseError("missing 'format ascii' header element", reader.line_no);

    const auto vertex = std::find_if(elements.begin(), elements.end(),
                                     [](const Element& e) { return e.name == "vertex"; });
    if (vertex == elements.end())
        throw ParseError("missing 'element vertex' header element", reader.line_no);
    if (vertex->count < 1) throw ParseError("PLY declares an empty cloud", reader.line_no);

    long ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < vertex->properties.size(); ++i) {
        if (vertex->properties[i] == "x") ix = static_cast<long>(i);
        if (vertex->properties[i] == "y") iy = static_cast<long>(i);
        if (vertex->properties[i] == "z") iz = static_cast<long>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError("vertex element lacks x/y/z properties", reader.line_no);

    geo::RawPointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(vertex->count));
    for (const Element& elem : elements) {
        for (long i = 0; i < elem.count; ++i) {
            line = reader.next();
            if (!line) throw ParseError("truncated PLY body", reader.line_no);
            if (&elem != &*vertex) continue;
            const auto toks = tokenize(*line);
            if (static_cast<long>(toks.size()) < static_cast<long>(elem.properties.size()))
                throw ParseError("vertex line shorter than property list", reader.line_no);
            cloud.points.push_back(
                {parse_double(toks[static_cast<std::size_t>(ix)], reader.line_no),
                 parse_double(toks[static_cast<std::size_t>(iy)], reader.line_no),
                 parse_double(toks[static_cast<std::size_t>(iz)], reader.line_no)});
        }
    }
    cloud.validate();
    return cloud;
}

std::string format_xyz(const geo::RawPointCloud& cloud) {
    std::string out;
    out.reserve(cloud.points.size() * 32);
    char buf[96];
    for (const Vec3& p : cloud.points) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
        out += buf;
    }
    return out;
}

void write_xyz(const geo::RawPointCloud& cloud, const std::filesystem::path& path) {
    cloud.validate();
    write_file(path, format_xyz(cloud));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

geo::RawPointCloud load_cloud(const std::filesystem::path& path, std::size_t mesh_samples,
                              std::uint64_t seed) {
    const std::string ext = path.extension().string();
    geo::RawPointCloud cloud;
    if (ext == ".xyz" || ext == ".txt") {
        cloud = parse_xyz(read_file(path));
    } else if (ext == ".ply") {
        cloud = parse_ply_ascii(read_file(path));
    } else if (ext == ".off") {
        cloud = geo::sample_mesh_surface(parse_off(read_file(path)), mesh_samples, seed);
    } else {
        throw ConfigError("unsupported point-cloud extension '" + ext + "'");
    }
    cloud.source_id = path.string();
    return cloud;
}

geo::DatasetManifest parse_manifest(std::string_view text) {
    LineReader reader{text};
    geo::DatasetManifest manifest;
    while (auto line = reader.next()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(*line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("manifest: ") + e.what(), reader.line_no);
        }
        geo::ManifestEntry entry;
        if (!j.contains("path")) throw ParseError("manifest entry lacks 'path'", reader.line_no);
        entry.path = j.at("path").get<std::string>();
        if (j.contains("label") && !j.at("label").is_null())
            entry.label = j.at("label").get<std::string>();
        if (j.contains("split")) {
            const auto s = geo::split_from_string(j.at("split").get<std::string>());
            if (!s) throw ParseError("manifest split must be 'train' or 'test'", reader.line_no);
            entry.split = *s;
        }
        manifest.entries.push_back(std::move(entry));
    }
    manifest.validate();
    return manifest;
}

geo::DatasetManifest load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file(path));
}

std::string format_manifest(const geo::DatasetManifest& manifest) {
    std::string out;
    for (const auto& e : manifest.entries) {
        nlohmann::json j;
        j["path"] = e.path;
        if (!e.label.empty()) j["label"] = e.label;
        j["split"] = geo::to_string(e.split);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_manifest(const geo::DatasetManifest& manifest, const std::filesystem::path& path) {
    manifest.validate();
    write_file(path, format_manifest(manifest));
}

}  // namespace lila::io
