#include "amosl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "amosl/errors.hpp"
#include "amosl/rng.hpp"

namespace fs = std::filesystem;

namespace amosl {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(trim(cur));
    return out;
}

[[noreturn]] void bad_token(const std::string& file, std::size_t lineno, const std::string& tok) {
    std::ostringstream os;
    os << file << ":" << lineno << ": malformed numeric token '" << tok << "'";
    throw DataError(os.str());
}

long parse_long(const std::string& tok, const std::string& file, std::size_t lineno) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        bad_token(file, lineno, tok);
    }
    if (pos != tok.size()) bad_token(file, lineno, tok);
    return v;
}

double parse_double(const std::string& tok, const std::string& file, std::size_t lineno) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        bad_token(file, lineno, tok);
    }
    if (pos != tok.size()) bad_token(file, lineno, tok);
    return v;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

// Little-endian 64-bit serialization, independent of host byte order.
void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double read_f64(std::istream& in, const std::string& path) {
    return std::bit_cast<double>(read_u64(in, path));
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (std::size_t k = 0; k < m.size(); ++k) write_f64(out, m.data()[k]);
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols, const std::string& path) {
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m.raw()[k] = read_f64(in, path);
    return m;
}

}  // namespace

std::size_t RawDataset::class_count() const {
    return std::set<long>(graph_labels.begin(), graph_labels.end()).size();
}

double RawDataset::mean_vertices() const {
    if (graph_count == 0) return 0.0;
    return static_cast<double>(node_count()) / static_cast<double>(graph_count);
}

std::vector<std::size_t> PreparedDataset::labels() const {
    std::vector<std::size_t> out;
    out.reserve(graphs.size());
    for (const GraphSample& g : graphs) out.push_back(g.label);
    return out;
}

std::vector<std::size_t> FoldSplit::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
}

RawDataset parse_tudataset(const std::string& directory, const std::string& name) {
    auto locate = [&](const std::string& suffix) -> std::string {
        const std::string flat = directory + "/" + name + suffix;
        if (fs::exists(flat)) return flat;
        const std::string nested = directory + "/" + name + "/" + name + suffix;
        if (fs::exists(nested)) return nested;
        return "";
    };
    auto require_file = [&](const std::string& suffix) {
        const std::string p = locate(suffix);
        if (p.empty()) {
            throw DataError("missing mandatory file: " + directory + "/" + name + suffix +
                            " (also tried " + directory + "/" + name + "/" + name + suffix + ")");
        }
        return p;
    };

    RawDataset raw;
    raw.name = name;

    const std::string ind_path = require_file("_graph_indicator.txt");
    {
        const auto lines = read_lines(ind_path);
        raw.graph_of_node.reserve(lines.size());
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            const long gid = parse_long(trim(lines[ln]), ind_path, ln + 1);
            if (gid < 1) {
                std::ostringstream os;
                os << ind_path << ":" << ln + 1 << ": graph id " << gid << " is not 1-based";
                throw DataError(os.str());
            }
            raw.graph_of_node.push_back(static_cast<std::size_t>(gid - 1));
            raw.graph_count = std::max(raw.graph_count, static_cast<std::size_t>(gid));
        }
    }
    raw.graph_nodes.assign(raw.graph_count, {});
    for (std::size_t v = 0; v < raw.graph_of_node.size(); ++v) {
        raw.graph_nodes[raw.graph_of_node[v]].push_back(v);
    }
    for (std::size_t g = 0; g < raw.graph_count; ++g) {
        if (raw.graph_nodes[g].empty()) {
            std::ostringstream os;
            os << ind_path << ": graph " << g + 1 << " has no nodes";
            throw DataError(os.str());
        }
    }

    const std::string lab_path = require_file("_graph_labels.txt");
    {
        const auto lines = read_lines(lab_path);
        if (lines.size() != raw.graph_count) {
            std::ostringstream os;
            os << lab_path << ": " << lines.size() << " labels for " << raw.graph_count << " graphs";
            throw DataError(os.str());
        }
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            raw.graph_labels.push_back(parse_long(trim(lines[ln]), lab_path, ln + 1));
        }
    }

    const std::string a_path = require_file("_A.txt");
    {
        const auto lines = read_lines(a_path);
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            if (trim(lines[ln]).empty()) continue;
            const auto toks = split_csv(lines[ln]);
            if (toks.size() != 2) bad_token(a_path, ln + 1, lines[ln]);
            const long u = parse_long(toks[0], a_path, ln + 1);
            const long v = parse_long(toks[1], a_path, ln + 1);
            if (u < 1 || v < 1 || static_cast<std::size_t>(u) > raw.node_count() ||
                static_cast<std::size_t>(v) > raw.node_count()) {
                std::ostringstream os;
                os << a_path << ":" << ln + 1 << ": node id out of range";
                throw DataError(os.str());
            }
            const std::size_t ui = static_cast<std::size_t>(u - 1);
            const std::size_t vi = static_cast<std::size_t>(v - 1);
            if (raw.graph_of_node[ui] != raw.graph_of_node[vi]) {
                std::ostringstream os;
                os << a_path << ":" << ln + 1 << ": edge (" << u << "," << v
                   << ") crosses graph boundaries";
                throw DataError(os.str());
            }
            raw.edges.emplace_back(ui, vi);
        }
    }

    if (const std::string p = locate("_node_labels.txt"); !p.empty()) {
        const auto lines = read_lines(p);
        if (lines.size() != raw.node_count()) {
            std::ostringstream os;
            os << p << ": " << lines.size() << " labels for " << raw.node_count() << " nodes";
            throw DataError(os.str());
        }
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            raw.node_labels.push_back(parse_long(trim(lines[ln]), p, ln + 1));
        }
    }

    if (const std::string p = locate("_node_attributes.txt"); !p.empty()) {
        const auto lines = read_lines(p);
        if (lines.size() != raw.node_count()) {
            std::ostringstream os;
            os << p << ": " << lines.size() << " attribute rows for " << raw.node_count() << " nodes";
            throw DataError(os.str());
        }
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            const auto toks = split_csv(lines[ln]);
            std::vector<double> row;
            row.reserve(toks.size());
            for (const auto& t : toks) row.push_back(parse_double(t, p, ln + 1));
            if (!raw.node_attributes.empty() && row.size() != raw.node_attributes.front().size()) {
                std::ostringstream os;
                os << p << ":" << ln + 1 << ": inconsistent attribute dimension";
                throw DataError(os.str());
            }
            raw.node_attributes.push_back(std::move(row));
        }
    }

    return raw;
}

std::vector<Matrix> build_features(const RawDataset& raw) {
    const bool has_labels = !raw.node_labels.empty();
    const bool has_attrs = !raw.node_attributes.empty();
    if (!has_labels && !has_attrs) {
        throw DataError(raw.name + ": dataset has neither node labels nor node attributes");
    }
    std::map<long, std::size_t> alphabet;
    if (has_labels) {
        std::set<long> distinct(raw.node_labels.begin(), raw.node_labels.end());
        std::size_t idx = 0;
        for (const long l : distinct) alphabet[l] = idx++;
    }
    const std::size_t attr_dim = has_attrs ? raw.node_attributes.front().size() : 0;
    const std::size_t d = alphabet.size() + attr_dim;

    std::vector<Matrix> features;
    features.reserve(raw.graph_count);
    for (std::size_t g = 0; g < raw.graph_count; ++g) {
        const auto& nodes = raw.graph_nodes[g];
        Matrix x(nodes.size(), d);
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const std::size_t v = nodes[r];
            if (has_labels) x(r, alphabet.at(raw.node_labels[v])) = 1.0;
            if (has_attrs) {
                for (std::size_t c = 0; c < attr_dim; ++c) {
                    x(r, alphabet.size() + c) = raw.node_attributes[v][c];
                }
            }
        }
        features.push_back(std::move(x));
    }
    return features;
}

Matrix modality_from_metric(const Matrix& x, const Matrix& m) {
    if (m.rows() != x.cols() || m.cols() != x.cols()) {
        throw ShapeError("modality_from_metric: metric must be d x d");
    }
    const std::size_t n = x.rows(), d = x.cols();
    Matrix dist(n, n);
    std::vector<double> diff(d), mdiff(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t o = 0; o < d; ++o) diff[o] = x(i, o) - x(j, o);
            double q = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                double row = 0.0;
                for (std::size_t b = 0; b < d; ++b) row += m(a, b) * diff[b];
                q += diff[a] * row;
            }
            const double dv = std::sqrt(std::max(0.0, q));
            dist(i, j) = dv;
            dist(j, i) = dv;
        }
    }

    if (n > 1) {
        double mean = 0.0;
        const double count = static_cast<double>(n * n - n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) mean += dist(i, j);
            }
        }
        mean /= count;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) var += (dist(i, j) - mean) * (dist(i, j) - mean);
            }
        }
        const double sd = std::sqrt(var / count);
        if (sd >= 1e-12) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j) dist(i, j) = (dist(i, j) - mean) / sd;
                }
            }
        }
    }

    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s(i, j) = (i == j) ? 1.0 : std::exp(-dist(i, j) / 2.0);
        }
    }
    return s;
}

Matrix synthesize_modality(const Matrix& x, std::uint64_t seed) {
    const std::size_t d = x.cols();
    std::mt19937_64 rng(seed);
    Matrix r(d, d);
    for (std::size_t k = 0; k < r.size(); ++k) r.raw()[k] = normal01(rng);
    return modality_from_metric(x, matmul(transpose(r), r));
}

PreparedDataset prepare_dataset(const RawDataset& raw, std::uint64_t seed) {
    PreparedDataset out;
    out.name = raw.name;
    std::vector<Matrix> features = build_features(raw);
    out.feature_dim = features.empty() ? 0 : features.front().cols();

    std::map<long, std::size_t> class_of;
    {
        std::set<long> distinct(raw.graph_labels.begin(), raw.graph_labels.end());
        std::size_t idx = 0;
        for (const long l : distinct) class_of[l] = idx++;
    }
    out.classes = class_of.size();

    std::vector<std::size_t> local(raw.node_count());
    for (std::size_t g = 0; g < raw.graph_count; ++g) {
        for (std::size_t r = 0; r < raw.graph_nodes[g].size(); ++r) {
            local[raw.graph_nodes[g][r]] = r;
        }
    }

    std::vector<Matrix> adj;
    adj.reserve(raw.graph_count);
    for (std::size_t g = 0; g < raw.graph_count; ++g) {
        adj.emplace_back(raw.graph_nodes[g].size(), raw.graph_nodes[g].size());
    }
    for (const auto& [u, v] : raw.edges) {
        if (u == v) continue;  // keep the diagonal zero
        const std::size_t g = raw.graph_of_node[u];
        adj[g](local[u], local[v]) = 1.0;
        adj[g](local[v], local[u]) = 1.0;
    }

    out.graphs.reserve(raw.graph_count);
    for (std::size_t g = 0; g < raw.graph_count; ++g) {
        GraphSample s;
        s.x = std::move(features[g]);
        s.a = std::move(adj[g]);
        s.s = synthesize_modality(s.x, mix_seed(seed, g));
        s.label = class_of.at(raw.graph_labels[g]);
        out.graphs.push_back(std::move(s));
    }
    return out;
}

FoldSplit make_folds(const std::vector<std::size_t>& labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValueError("make_folds: k must be >= 2");
    if (labels.empty() || k > labels.size()) {
        throw ValueError("make_folds: k exceeds the sample count");
    }
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    FoldSplit split;
    split.k = k;
    split.fold_of.assign(labels.size(), 0);
    std::mt19937_64 rng(seed);
    std::size_t cursor = 0;  // continues across classes so global sizes stay balanced
    for (auto& [cls, members] : by_class) {
        (void)cls;
        shuffle(members, rng);
        for (const std::size_t idx : members) {
            split.fold_of[idx] = cursor % k;
            ++cursor;
        }
    }
    return split;
}

void save_prepared(const PreparedDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "AMOSL-PREPARED 1\n";
    out << "name " << dataset.name << "\n";
    out << "classes " << dataset.classes << "\n";
    out << "feature_dim " << dataset.feature_dim << "\n";
    out << "graphs " << dataset.graphs.size() << "\n";
    for (const GraphSample& g : dataset.graphs) {
        out << "graph " << g.nodes() << " " << g.label << "\n";
    }
    out << "data\n";
    for (const GraphSample& g : dataset.graphs) {
        write_matrix(out, g.x);
        write_matrix(out, g.a);
        write_matrix(out, g.s);
    }
    if (!out) throw DataError("write failed: " + path);
}

PreparedDataset load_prepared(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw DataError(path + ": truncated file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "AMOSL-PREPARED 1") {
        throw DataError(path + ": bad magic or unsupported format version");
    }
    auto field = [&](const std::string& key) -> std::string {
        const std::string l = next_line();
        if (l.rfind(key + " ", 0) != 0) throw DataError(path + ": expected '" + key + "' line");
        return l.substr(key.size() + 1);
    };

    PreparedDataset ds;
    ds.name = field("name");
    ds.classes = static_cast<std::size_t>(parse_long(field("classes"), path, 3));
    ds.feature_dim = static_cast<std::size_t>(parse_long(field("feature_dim"), path, 4));
    const std::size_t count = static_cast<std::size_t>(parse_long(field("graphs"), path, 5));

    std::vector<std::pair<std::size_t, std::size_t>> shapes;  // (n, label)
    shapes.reserve(count);
    for (std::size_t g = 0; g < count; ++g) {
        const std::string l = next_line();
        std::istringstream is(l);
        std::string tag;
        std::size_t n = 0, label = 0;
        if (!(is >> tag >> n >> label) || tag != "graph") {
            throw DataError(path + ": malformed graph line '" + l + "'");
        }
        if (label >= ds.classes) throw DataError(path + ": label out of range in manifest");
        shapes.emplace_back(n, label);
    }
    if (next_line() != "data") throw DataError(path + ": missing data sentinel");

    ds.graphs.reserve(count);
    for (const auto& [n, label] : shapes) {
        GraphSample s;
        s.x = read_matrix(in, n, ds.feature_dim, path);
        s.a = read_matrix(in, n, n, path);
        s.s = read_matrix(in, n, n, path);
        s.label = label;
        ds.graphs.push_back(std::move(s));
    }
    return ds;
}

}  // namespace amosl
