#include "amosl/types.hpp"

namespace amosl {

std::string to_string(ConvKind k) {
    return k == ConvKind::ChebNet ? "chebnet" : "gcn";
}

std::string to_string(FusionKind k) {
    switch (k) {
        case FusionKind::Max: return "max";
        case FusionKind::Concat: return "concat";
        case FusionKind::Hadamard: return "hadamard";
    }
    return "max";
}

std::string to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::Ot: return "ot";
        case DistanceKind::Manhattan: return "manhattan";
        case DistanceKind::Euclidean: return "euclidean";
        case DistanceKind::Cosine: return "cosine";
    }
    return "ot";
}

std::string to_string(RegMode k) {
    switch (k) {
        case RegMode::Adaptive: return "adaptive";
        case RegMode::FixedOne: return "fixed_one";
        case RegMode::Off: return "off";
    }
    return "adaptive";
}

std::string to_string(Modality2Mode k) {
    return k == Modality2Mode::Dense ? "dense" : "masked";
}

namespace {

[[noreturn]] void bad_value(const char* what, const std::string& s) {
    throw ValueError(std::string(what) + ": unknown value '" + s + "'");
}

}  // namespace

ConvKind conv_kind_from(const std::string& s) {
    if (s == "chebnet") return ConvKind::ChebNet;
    if (s == "gcn") return ConvKind::Gcn;
    bad_value("conv", s);
}

FusionKind fusion_kind_from(const std::string& s) {
    if (s == "max") return FusionKind::Max;
    if (s == "concat") return FusionKind::Concat;
    if (s == "hadamard") return FusionKind::Hadamard;
    bad_value("fusion", s);
}

DistanceKind distance_kind_from(const std::string& s) {
    if (s == "ot") return DistanceKind::Ot;
    if (s == "manhattan") return DistanceKind::Manhattan;
    if (s == "euclidean") return DistanceKind::Euclidean;
    if (s == "cosine") return DistanceKind::Cosine;
    bad_value("distance", s);
}

RegMode reg_mode_from(const std::string& s) {
    if (s == "adaptive") return RegMode::Adaptive;
    if (s == "fixed_one") return RegMode::FixedOne;
    if (s == "off") return RegMode::Off;
    bad_value("reg_mode", s);
}

Modality2Mode modality2_mode_from(const std::string& s) {
    if (s == "dense") return Modality2Mode::Dense;
    if (s == "masked") return Modality2Mode::Masked;
    bad_value("modality2", s);
}

}  // namespace amosl
