#include "amosl/config.hpp"

#include <fstream>
#include <sstream>

#include "amosl/errors.hpp"

namespace amosl {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t lineno, const std::string& msg) {
    std::ostringstream os;
    os << origin << ":" << lineno << ": " << msg;
    throw ValueError(os.str());
}

double parse_num(const std::string& v, const std::string& origin, std::size_t lineno) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        fail(origin, lineno, "malformed number '" + v + "'");
    }
    if (pos != v.size()) fail(origin, lineno, "malformed number '" + v + "'");
    return x;
}

std::size_t parse_count(const std::string& v, const std::string& origin, std::size_t lineno) {
    const double x = parse_num(v, origin, lineno);
    if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x))) {
        fail(origin, lineno, "expected a nonnegative integer, got '" + v + "'");
    }
    return static_cast<std::size_t>(x);
}

TransportGradOptions parse_grad_mode(const std::string& v, const std::string& origin,
                                     std::size_t lineno) {
    TransportGradOptions g;
    if (v == "envelope") {
        g.mode = TransportGradMode::Envelope;
        return g;
    }
    if (v == "kkt_qp") {
        g.mode = TransportGradMode::KktQp;
        return g;
    }
    if (v.rfind("kkt_qp:", 0) == 0) {
        g.mode = TransportGradMode::KktQp;
        g.damping = parse_num(v.substr(7), origin, lineno);
        return g;
    }
    fail(origin, lineno, "grad_mode must be envelope, kkt_qp or kkt_qp:<eps>, got '" + v + "'");
}

}  // namespace

std::string to_string(const TransportGradOptions& grad) {
    if (grad.mode == TransportGradMode::Envelope) return "envelope";
    std::ostringstream os;
    os << "kkt_qp:" << grad.damping;
    return os.str();
}

TrainConfig TrainConfig::from_string(const std::string& text, const std::string& origin) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty()) fail(origin, lineno, "expected 'key = value'");

        try {
            if (key == "dataset") {
                c.dataset = value;
            } else if (key == "conv") {
                c.conv = conv_kind_from(value);
            } else if (key == "cheb_k") {
                c.cheb_k = parse_count(value, origin, lineno);
            } else if (key == "fusion") {
                c.fusion = fusion_kind_from(value);
            } else if (key == "lambda") {
                c.lambda = parse_num(value, origin, lineno);
            } else if (key == "gamma") {
                c.gamma = parse_num(value, origin, lineno);
            } else if (key == "lr") {
                c.lr = parse_num(value, origin, lineno);
            } else if (key == "epochs") {
                c.epochs = parse_count(value, origin, lineno);
            } else if (key == "batch") {
                c.batch = parse_count(value, origin, lineno);
            } else if (key == "dropout") {
                c.dropout = parse_num(value, origin, lineno);
            } else if (key == "seed") {
                c.seed = static_cast<std::uint64_t>(parse_count(value, origin, lineno));
            } else if (key == "grad_mode") {
                c.grad = parse_grad_mode(value, origin, lineno);
            } else if (key == "reg_mode") {
                c.reg_mode = reg_mode_from(value);
            } else if (key == "distance") {
                c.distance = distance_kind_from(value);
            } else if (key == "modality2") {
                c.modality2 = modality2_mode_from(value);
            } else {
                fail(origin, lineno, "unknown key '" + key + "'");
            }
        } catch (const ValueError& e) {
            // Re-anchor enum parse errors to the config line.
            std::ostringstream os;
            os << origin << ":" << lineno << ": " << e.what();
            throw ValueError(os.str());
        }
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

std::string TrainConfig::canonical() const {
    std::ostringstream os;
    os << "dataset = " << dataset << "\n";
    os << "conv = " << to_string(conv) << "\n";
    os << "cheb_k = " << cheb_k << "\n";
    os << "fusion = " << to_string(fusion) << "\n";
    os << "lambda = " << lambda << "\n";
    os << "gamma = " << gamma << "\n";
    os << "lr = " << lr << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch = " << batch << "\n";
    os << "dropout = " << dropout << "\n";
    os << "seed = " << seed << "\n";
    os << "grad_mode = " << to_string(grad) << "\n";
    os << "reg_mode = " << to_string(reg_mode) << "\n";
    os << "distance = " << to_string(distance) << "\n";
    os << "modality2 = " << to_string(modality2) << "\n";
    return os.str();
}

void TrainConfig::validate() const {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw ValueError("config: lambda must lie in (0, 1)");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValueError("config: gamma must lie in [0, 1)");
    if (epochs < 1) throw ValueError("config: epochs must be >= 1");
    if (batch < 1) throw ValueError("config: batch must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValueError("config: dropout must lie in [0, 1)");
    if (!(lr > 0.0)) throw ValueError("config: lr must be positive");
    if (conv == ConvKind::ChebNet && cheb_k < 1) throw ValueError("config: cheb_k must be >= 1");
    if (grad.mode == TransportGradMode::KktQp && !(grad.damping > 0.0)) {
        throw ValueError("config: kkt_qp damping must be positive");
    }
}

}  // namespace amosl
