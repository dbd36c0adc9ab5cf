#include "msvg/dataio.hpp"

#include "msvg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fs = std::filesystem;

namespace msvg {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    while (begin < end && (*begin == ' ' || *begin == '+')) {
        ++begin;
    }
    while (end > begin && (end[-1] == ' ' || end[-1] == '\r')) {
        --end;
    }
    double value = 0.0;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end || begin == end) {
        throw DataError(context + ": cannot parse number '" + text + "'");
    }
    return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            std::string last = line.substr(start);
            if (!last.empty() && last.back() == '\r') {
                last.pop_back();
            }
            out.push_back(std::move(last));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::ifstream open_input(const std::string& path) {
    if (!fs::exists(path)) {
        throw IoError("file not found: " + path);
    }
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    return out;
}

double parse_count(const std::string& text, const std::string& context) {
    const double v = parse_double(text, context);
    if (!(v >= 0.0) || std::floor(v) != v || !std::isfinite(v)) {
        throw DataError(context + ": count must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::vector<std::string> read_id_list(const std::string& path) {
    auto in = open_input(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty()) {
            ids.push_back(line);
        }
    }
    return ids;
}

void require_unique(const std::vector<std::string>& ids, const std::string& what, const std::string& path) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw DataError(path + ": duplicate " + what + " '" + id + "'");
        }
    }
}

struct RawCounts {
    CountMatrix counts;
    std::vector<std::string> gene_ids;
    std::vector<std::string> spot_ids;
};

RawCounts read_dense_counts(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path + ": empty counts file");
    }
    RawCounts raw;
    auto header = split_tabs(line);
    raw.spot_ids.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != raw.spot_ids.size() + 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(raw.spot_ids.size() + 1)
                            + " fields");
        }
        raw.gene_ids.push_back(fields[0]);
        std::vector<double> row(raw.spot_ids.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = parse_count(fields[j + 1], path + ":" + std::to_string(lineno));
        }
        rows.push_back(std::move(row));
    }
    raw.counts.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(raw.spot_ids.size()));
    for (std::size_t g = 0; g < rows.size(); ++g) {
        for (std::size_t j = 0; j < rows[g].size(); ++j) {
            raw.counts(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j)) = rows[g][j];
        }
    }
    return raw;
}

RawCounts read_triplet_counts(const std::string& path, const std::string& genes_path, const std::string& spots_path) {
    if (genes_path.empty() || spots_path.empty()) {
        throw DataError(path + ": triplet format requires 'genes' and 'spots' lists");
    }
    RawCounts raw;
    raw.gene_ids = read_id_list(genes_path);
    raw.spot_ids = read_id_list(spots_path);
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    bool have_dims = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '%' || t[0] == '#') {
            continue;
        }
        std::istringstream fields(t);
        std::string a, b, c;
        fields >> a >> b >> c;
        const std::string where = path + ":" + std::to_string(lineno);
        if (!have_dims) {
            const double ng = parse_count(a, where);
            const double ns = parse_count(b, where);
            if (static_cast<std::size_t>(ng) != raw.gene_ids.size() || static_cast<std::size_t>(ns) != raw.spot_ids.size()) {
                throw DataError(where + ": dimension line disagrees with gene/spot lists");
            }
            raw.counts = CountMatrix::Zero(static_cast<Eigen::Index>(ng), static_cast<Eigen::Index>(ns));
            have_dims = true;
            continue;
        }
        const double gi = parse_count(a, where);
        const double si = parse_count(b, where);
        const double v = parse_count(c, where);
        if (gi < 1 || si < 1 || gi > static_cast<double>(raw.gene_ids.size()) || si > static_cast<double>(raw.spot_ids.size())) {
            throw DataError(where + ": index out of range");
        }
        raw.counts(static_cast<Eigen::Index>(gi) - 1, static_cast<Eigen::Index>(si) - 1) += v;
    }
    if (!have_dims) {
        throw DataError(path + ": missing dimension line");
    }
    return raw;
}

struct SpotTable {
    std::vector<std::string> names;
    std::vector<std::string> spot_ids;
    Eigen::MatrixXd values;
};

SpotTable read_spot_table(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path + ": empty file");
    }
    SpotTable table;
    auto header = split_tabs(line);
    table.names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != table.names.size() + 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": wrong number of fields");
        }
        table.spot_ids.push_back(fields[0]);
        std::vector<double> row(table.names.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = parse_double(fields[j + 1], path + ":" + std::to_string(lineno));
            if (!std::isfinite(row[j])) {
                throw DataError(path + ":" + std::to_string(lineno) + ": non-finite value");
            }
        }
        rows.push_back(std::move(row));
    }
    require_unique(table.spot_ids, "spot id", path);
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return table;
}

// Reorders table rows to follow `spot_ids`; every id must be present exactly once.
Eigen::MatrixXd match_spots(const SpotTable& table, const std::vector<std::string>& spot_ids, const std::string& path) {
    if (table.spot_ids.size() != spot_ids.size()) {
        throw DataError(path + ": spot count differs from the counts file");
    }
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < table.spot_ids.size(); ++i) {
        index.emplace(table.spot_ids[i], static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(spot_ids.size()), table.values.cols());
    for (std::size_t i = 0; i < spot_ids.size(); ++i) {
        const auto it = index.find(spot_ids[i]);
        if (it == index.end()) {
            throw DataError(path + ": spot id mismatch, '" + spot_ids[i] + "' missing");
        }
        out.row(static_cast<Eigen::Index>(i)) = table.values.row(it->second);
    }
    return out;
}

std::string resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) {
        return value;
    }
    const fs::path p(value);
    return p.is_absolute() ? p.string() : (base / p).string();
}

SpatialSample subset(const SpatialSample& s, const std::vector<Eigen::Index>& genes, const std::vector<Eigen::Index>& spots) {
    SpatialSample out;
    out.sample_id = s.sample_id;
    out.covariate_names = s.covariate_names;
    out.counts.resize(static_cast<Eigen::Index>(genes.size()), static_cast<Eigen::Index>(spots.size()));
    out.coords.resize(static_cast<Eigen::Index>(spots.size()), 2);
    out.covariates.resize(static_cast<Eigen::Index>(spots.size()), s.covariates.cols());
    for (std::size_t j = 0; j < spots.size(); ++j) {
        const auto src = spots[j];
        const auto dst = static_cast<Eigen::Index>(j);
        out.coords.row(dst) = s.coords.row(src);
        out.covariates.row(dst) = s.covariates.row(src);
        out.spot_ids.push_back(s.spot_ids[static_cast<std::size_t>(src)]);
        for (std::size_t g = 0; g < genes.size(); ++g) {
            out.counts(static_cast<Eigen::Index>(g), dst) = s.counts(genes[g], src);
        }
    }
    for (auto g : genes) {
        out.gene_ids.push_back(s.gene_ids[static_cast<std::size_t>(g)]);
    }
    return out;
}

std::vector<Eigen::Index> all_indices(std::size_t n) {
    std::vector<Eigen::Index> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<Eigen::Index>(i);
    }
    return out;
}

} // namespace

Manifest read_manifest(const std::string& path) {
    auto in = open_input(path);
    const fs::path base = fs::path(path).parent_path();
    Manifest manifest;
    std::string line;
    std::size_t lineno = 0;
    ManifestEntry* current = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') {
            continue;
        }
        const std::string where = path + ":" + std::to_string(lineno);
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw DataError(where + ": malformed section header");
            }
            manifest.entries.emplace_back();
            current = &manifest.entries.back();
            current->sample_id = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos || current == nullptr) {
            throw DataError(where + ": expected 'key = value' inside a [sample] section");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key == "counts") {
            current->counts_path = resolve(base, value);
        } else if (key == "coords") {
            current->coords_path = resolve(base, value);
        } else if (key == "covariates") {
            current->covariates_path = resolve(base, value);
        } else if (key == "genes") {
            current->genes_path = resolve(base, value);
        } else if (key == "spots") {
            current->spots_path = resolve(base, value);
        } else if (key == "format") {
            if (value == "dense") {
                current->format = CountFormat::dense;
            } else if (value == "triplet") {
                current->format = CountFormat::triplet;
            } else {
                throw DataError(where + ": unknown format '" + value + "'");
            }
        } else {
            throw DataError(where + ": unknown key '" + key + "'");
        }
    }
    if (manifest.entries.empty()) {
        throw DataError(path + ": no samples listed");
    }
    std::vector<std::string> ids;
    for (const auto& e : manifest.entries) {
        if (e.counts_path.empty() || e.coords_path.empty()) {
            throw DataError(path + ": sample '" + e.sample_id + "' needs counts and coords paths");
        }
        ids.push_back(e.sample_id);
    }
    require_unique(ids, "sample id", path);
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    auto out = open_output(path);
    bool first = true;
    for (const auto& e : manifest.entries) {
        if (!first) {
            out << '\n';
        }
        first = false;
        out << '[' << e.sample_id << "]\n";
        out << "counts = " << e.counts_path << '\n';
        out << "coords = " << e.coords_path << '\n';
        if (!e.covariates_path.empty()) {
            out << "covariates = " << e.covariates_path << '\n';
        }
        out << "format = " << (e.format == CountFormat::dense ? "dense" : "triplet") << '\n';
        if (!e.genes_path.empty()) {
            out << "genes = " << e.genes_path << '\n';
        }
        if (!e.spots_path.empty()) {
            out << "spots = " << e.spots_path << '\n';
        }
    }
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

void validate_sample(const SpatialSample& s) {
    const auto n = static_cast<Eigen::Index>(s.spot_ids.size());
    if (s.counts.cols() != n || s.coords.rows() != n || s.covariates.rows() != n) {
        throw DataError("sample '" + s.sample_id + "': spot dimensions disagree");
    }
    if (s.coords.cols() != 2) {
        throw DataError("sample '" + s.sample_id + "': coordinates need two columns");
    }
    if (s.counts.rows() != static_cast<Eigen::Index>(s.gene_ids.size())) {
        throw DataError("sample '" + s.sample_id + "': gene dimension disagrees with gene ids");
    }
    if (static_cast<std::size_t>(s.covariates.cols()) != s.covariate_names.size()) {
        throw DataError("sample '" + s.sample_id + "': covariate names disagree with columns");
    }
    require_unique(s.spot_ids, "spot id", s.sample_id);
    require_unique(s.gene_ids, "gene id", s.sample_id);
    for (Eigen::Index i = 0; i < s.counts.size(); ++i) {
        const double v = s.counts.data()[i];
        if (!(v >= 0.0) || std::floor(v) != v || !std::isfinite(v)) {
            throw DataError("sample '" + s.sample_id + "': counts must be non-negative integers");
        }
    }
    if (!s.coords.allFinite() || !s.covariates.allFinite()) {
        throw DataError("sample '" + s.sample_id + "': non-finite coordinate or covariate");
    }
}

SpatialSample load_sample(const ManifestEntry& entry) {
    RawCounts raw = entry.format == CountFormat::dense
                        ? read_dense_counts(entry.counts_path)
                        : read_triplet_counts(entry.counts_path, entry.genes_path, entry.spots_path);
    require_unique(raw.spot_ids, "spot id", entry.counts_path);
    require_unique(raw.gene_ids, "gene id", entry.counts_path);

    SpatialSample s;
    s.sample_id = entry.sample_id;
    s.counts = std::move(raw.counts);
    s.gene_ids = std::move(raw.gene_ids);
    s.spot_ids = std::move(raw.spot_ids);

    const SpotTable coords = read_spot_table(entry.coords_path);
    if (coords.names.size() != 2) {
        throw DataError(entry.coords_path + ": expected columns spot_id, s1, s2");
    }
    s.coords = match_spots(coords, s.spot_ids, entry.coords_path);

    if (entry.covariates_path.empty()) {
        s.covariates.resize(static_cast<Eigen::Index>(s.spot_ids.size()), 0);
    } else {
        const SpotTable cov = read_spot_table(entry.covariates_path);
        s.covariate_names = cov.names;
        s.covariates = match_spots(cov, s.spot_ids, entry.covariates_path);
    }
    validate_sample(s);
    return s;
}

MultiSampleDataset align_genes(std::vector<SpatialSample> samples, const std::vector<std::string>& gene_ids) {
    MultiSampleDataset ds;
    ds.gene_ids = gene_ids;
    for (auto& s : samples) {
        std::unordered_map<std::string, Eigen::Index> index;
        for (std::size_t g = 0; g < s.gene_ids.size(); ++g) {
            index.emplace(s.gene_ids[g], static_cast<Eigen::Index>(g));
        }
        std::vector<Eigen::Index> rows;
        rows.reserve(gene_ids.size());
        for (const auto& id : gene_ids) {
            const auto it = index.find(id);
            if (it == index.end()) {
                throw DataError("sample '" + s.sample_id + "' lacks gene '" + id + "'");
            }
            rows.push_back(it->second);
        }
        ds.samples.push_back(subset(s, rows, all_indices(s.spot_ids.size())));
    }
    return ds;
}

MultiSampleDataset load_dataset(const Manifest& manifest) {
    std::vector<SpatialSample> samples;
    for (const auto& entry : manifest.entries) {
        samples.push_back(load_sample(entry));
    }
    std::vector<std::string> shared = samples.front().gene_ids;
    for (std::size_t m = 1; m < samples.size(); ++m) {
        const std::unordered_set<std::string> present(samples[m].gene_ids.begin(), samples[m].gene_ids.end());
        std::erase_if(shared, [&](const std::string& id) { return !present.contains(id); });
    }
    if (shared.empty()) {
        throw DataError("no genes shared by all samples");
    }
    return align_genes(std::move(samples), shared);
}

MultiSampleDataset load_dataset(const std::string& manifest_path) {
    return load_dataset(read_manifest(manifest_path));
}

MultiSampleDataset filter_dataset(const MultiSampleDataset& ds, std::size_t min_spots_per_gene,
                                  std::size_t min_genes_per_spot) {
    MultiSampleDataset cur = ds;
    while (true) {
        bool changed = false;
        for (auto& s : cur.samples) {
            std::vector<Eigen::Index> keep;
            for (Eigen::Index j = 0; j < s.counts.cols(); ++j) {
                const auto expressed = static_cast<std::size_t>((s.counts.col(j).array() > 0.0).count());
                if (expressed >= min_genes_per_spot) {
                    keep.push_back(j);
                }
            }
            if (keep.empty()) {
                throw DataError("filtering removed all spots of sample '" + s.sample_id + "'");
            }
            if (keep.size() != s.spot_ids.size()) {
                s = subset(s, all_indices(s.gene_ids.size()), keep);
                changed = true;
            }
        }
        std::vector<Eigen::Index> genes;
        for (std::size_t g = 0; g < cur.gene_ids.size(); ++g) {
            bool ok = true;
            for (const auto& s : cur.samples) {
                const auto spots = static_cast<std::size_t>((s.counts.row(static_cast<Eigen::Index>(g)).array() > 0.0).count());
                if (spots < min_spots_per_gene) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                genes.push_back(static_cast<Eigen::Index>(g));
            }
        }
        if (genes.empty()) {
            throw DataError("filtering removed all genes");
        }
        if (genes.size() != cur.gene_ids.size()) {
            std::vector<std::string> ids;
            for (auto g : genes) {
                ids.push_back(cur.gene_ids[static_cast<std::size_t>(g)]);
            }
            for (auto& s : cur.samples) {
                s = subset(s, genes, all_indices(s.spot_ids.size()));
            }
            cur.gene_ids = std::move(ids);
            changed = true;
        }
        if (!changed) {
            return cur;
        }
    }
}

std::string write_dataset(const MultiSampleDataset& ds, const std::string& dir, CountFormat format) {
    fs::create_directories(dir);
    Manifest manifest;
    for (const auto& s : ds.samples) {
        ManifestEntry e;
        e.sample_id = s.sample_id;
        e.format = format;
        e.coords_path = s.sample_id + "_coords.tsv";
        {
            auto out = open_output((fs::path(dir) / e.coords_path).string());
            out << "spot_id\ts1\ts2\n";
            for (std::size_t i = 0; i < s.spot_ids.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                out << s.spot_ids[i] << '\t' << format_double(s.coords(r, 0)) << '\t' << format_double(s.coords(r, 1)) << '\n';
            }
        }
        if (s.covariates.cols() > 0) {
            e.covariates_path = s.sample_id + "_covariates.tsv";
            auto out = open_output((fs::path(dir) / e.covariates_path).string());
            out << "spot_id";
            for (const auto& name : s.covariate_names) {
                out << '\t' << name;
            }
            out << '\n';
            for (std::size_t i = 0; i < s.spot_ids.size(); ++i) {
                out << s.spot_ids[i];
                for (Eigen::Index j = 0; j < s.covariates.cols(); ++j) {
                    out << '\t' << format_double(s.covariates(static_cast<Eigen::Index>(i), j));
                }
                out << '\n';
            }
        }
        if (format == CountFormat::dense) {
            e.counts_path = s.sample_id + "_counts.tsv";
            auto out = open_output((fs::path(dir) / e.counts_path).string());
            out << "gene_id";
            for (const auto& id : s.spot_ids) {
                out << '\t' << id;
            }
            out << '\n';
            for (Eigen::Index g = 0; g < s.counts.rows(); ++g) {
                out << s.gene_ids[static_cast<std::size_t>(g)];
                for (Eigen::Index j = 0; j < s.counts.cols(); ++j) {
                    out << '\t' << static_cast<long long>(s.counts(g, j));
                }
                out << '\n';
            }
        } else {
            e.counts_path = s.sample_id + "_counts.mtx";
            e.genes_path = s.sample_id + "_genes.txt";
            e.spots_path = s.sample_id + "_spots.txt";
            std::size_t nnz = 0;
            for (Eigen::Index i = 0; i < s.counts.size(); ++i) {
                nnz += s.counts.data()[i] != 0.0 ? 1 : 0;
            }
            auto out = open_output((fs::path(dir) / e.counts_path).string());
            out << "% gene_index spot_index value\n";
            out << s.counts.rows() << ' ' << s.counts.cols() << ' ' << nnz << '\n';
            for (Eigen::Index g = 0; g < s.counts.rows(); ++g) {
                for (Eigen::Index j = 0; j < s.counts.cols(); ++j) {
                    if (s.counts(g, j) != 0.0) {
                        out << g + 1 << ' ' << j + 1 << ' ' << static_cast<long long>(s.counts(g, j)) << '\n';
                    }
                }
            }
            auto genes = open_output((fs::path(dir) / e.genes_path).string());
            for (const auto& id : s.gene_ids) {
                genes << id << '\n';
            }
            auto spots = open_output((fs::path(dir) / e.spots_path).string());
            for (const auto& id : s.spot_ids) {
                spots << id << '\n';
            }
        }
        manifest.entries.push_back(e);
    }
    const std::string path = (fs::path(dir) / "manifest.ini").string();
    write_manifest(manifest, path);
    return path;
}

} // namespace msvg
