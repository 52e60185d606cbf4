#include "amosl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "amosl/errors.hpp"

namespace amosl {
namespace {

void write_f64(std::ostream& out, double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

double read_f64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated file");
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
    return std::bit_cast<double>(u);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "AMOSL-CKPT 1\n";
    out << "conv " << to_string(params.conv.kind) << "\n";
    out << "cheb_k " << params.conv.cheb_k << "\n";
    out << "fusion " << to_string(params.fusion) << "\n";
    out << "modality2 " << to_string(params.modality2) << "\n";
    out << "in_dim " << params.in_dim << "\n";
    out << "classes " << params.classes << "\n";
    out << "dims " << params.dims.d1 << " " << params.dims.d2 << " " << params.dims.d3 << " "
        << params.dims.hidden << "\n";
    const auto refs = params.param_refs();
    for (const auto& [name, m] : refs) {
        out << "param " << name << " " << m->rows() << " " << m->cols() << "\n";
    }
    out << "data\n";
    for (const auto& [name, m] : refs) {
        (void)name;
        for (std::size_t k = 0; k < m->size(); ++k) write_f64(out, m->data()[k]);
    }
    if (!out) throw DataError("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) throw DataError(path + ": truncated file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "AMOSL-CKPT 1") {
        throw DataError(path + ": bad magic or unsupported format version");
    }
    auto field = [&](const std::string& key) -> std::string {
        next_line();
        if (line.rfind(key + " ", 0) != 0) throw DataError(path + ": expected '" + key + "' line");
        return line.substr(key.size() + 1);
    };

    ConvSpec conv;
    conv.kind = conv_kind_from(field("conv"));
    ModelDims dims;
    std::size_t in_dim = 0, classes = 0;
    {
        std::istringstream is(field("cheb_k"));
        if (!(is >> conv.cheb_k)) throw DataError(path + ": malformed cheb_k");
    }
    const FusionKind fusion = fusion_kind_from(field("fusion"));
    const Modality2Mode modality2 = modality2_mode_from(field("modality2"));
    {
        std::istringstream is(field("in_dim"));
        if (!(is >> in_dim)) throw DataError(path + ": malformed in_dim");
    }
    {
        std::istringstream is(field("classes"));
        if (!(is >> classes)) throw DataError(path + ": malformed classes");
    }
    {
        std::istringstream is(field("dims"));
        if (!(is >> dims.d1 >> dims.d2 >> dims.d3 >> dims.hidden)) {
            throw DataError(path + ": malformed dims");
        }
    }

    ModelParams params = ModelParams::init(in_dim, classes, conv, fusion, dims, 0);
    params.modality2 = modality2;
    auto refs = params.param_refs();

    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        next_line();
        std::istringstream is(line);
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        if (!(is >> tag >> name >> rows >> cols) || tag != "param") {
            throw DataError(path + ": malformed param line '" + line + "'");
        }
        if (name != refs[k].name || rows != refs[k].value->rows() ||
            cols != refs[k].value->cols()) {
            throw DataError(path + ": parameter '" + name + "' does not match the model layout");
        }
        shapes.emplace_back(rows, cols);
    }
    if (next_line() != "data") throw DataError(path + ": missing data sentinel");

    for (auto& ref : refs) {
        for (std::size_t k = 0; k < ref.value->size(); ++k) {
            ref.value->raw()[k] = read_f64(in, path);
        }
    }
    return params;
}

}  // namespace amosl
