#pragma once

#include <string>

#include "amosl/errors.hpp"

namespace amosl {

enum class ConvKind { ChebNet, Gcn };
enum class FusionKind { Max, Concat, Hadamard };
enum class DistanceKind { Ot, Manhattan, Euclidean, Cosine };
enum class RegMode { Adaptive, FixedOne, Off };
enum class Modality2Mode { Dense, Masked };
enum class TapeMode { Train, Eval };
enum class RegUpdate { Batch, Epoch };

std::string to_string(ConvKind k);
std::string to_string(FusionKind k);
std::string to_string(DistanceKind k);
std::string to_string(RegMode k);
std::string to_string(Modality2Mode k);

ConvKind conv_kind_from(const std::string& s);
FusionKind fusion_kind_from(const std::string& s);
DistanceKind distance_kind_from(const std::string& s);
RegMode reg_mode_from(const std::string& s);
Modality2Mode modality2_mode_from(const std::string& s);

}  // namespace amosl
