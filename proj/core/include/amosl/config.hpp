#pragma once

#include <cstdint>
#include <string>

#include "amosl/transport.hpp"
#include "amosl/types.hpp"

namespace amosl {

/// Training configuration, loaded from a flat `key = value` file. Unknown keys
/// are errors; omitted keys keep the defaults below (`dataset` is required by
/// the commands that read data).
struct TrainConfig {
    std::string dataset;  // path to a prepared dataset file
    ConvKind conv = ConvKind::ChebNet;
    std::size_t cheb_k = 6;
    FusionKind fusion = FusionKind::Max;
    double lambda = 5e-3;
    double gamma = 0.9;
    double lr = 5e-3;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    double dropout = 0.1;
    std::uint64_t seed = 1;
    TransportGradOptions grad;  // grad_mode key: envelope | kkt_qp | kkt_qp:<eps>
    RegMode reg_mode = RegMode::Adaptive;
    DistanceKind distance = DistanceKind::Ot;
    Modality2Mode modality2 = Modality2Mode::Dense;

    static TrainConfig from_file(const std::string& path);
    static TrainConfig from_string(const std::string& text, const std::string& origin);

    /// Canonical one-key-per-line form; parsing it back is the identity.
    std::string canonical() const;
    void validate() const;
};

std::string to_string(const TransportGradOptions& grad);

}  // namespace amosl
