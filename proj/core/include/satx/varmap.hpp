// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satx/fixed_point.hpp"

namespace satx {

// Every CNF variable plays exactly one role. Input/activation/output roles
// carry the coordinates needed to decode solver models back into features
// and logits; flip indicators drive contrastive queries; the rest is
// encoding machinery.
enum class VarKind : uint8_t {
  InputFeatureBit,   // a = frame, b = feature, c = bit
  ActivationBit,     // a = layer, b = unit, c = bit
  OutputLogitBit,    // a = class, b = bit
  FlipIndicator,     // a = frame, b = feature, c = bit (-1 for feature level)
  CardinalityAux,
  TseitinAux,
};

struct VarRole {
  VarKind kind = VarKind::TseitinAux;
  int32_t a = -1;
  int32_t b = -1;
  int32_t c = -1;

  bool operator==(const VarRole&) const = default;
};

// Weights and biases are folded into the circuit as constants; the ledger
// records their quantized values so the encoding stays auditable.
struct ConstantRecord {
  std::string name;
  QuantizedValue value;

  bool operator==(const ConstantRecord&) const = default;
};

class VarMap {
 public:
  // Appends the role of the next variable (1-based, in allocation order).
  void push(VarRole role) { roles_.push_back(role); }
  void record_constant(std::string name, QuantizedValue value) {
    constants_.push_back({std::move(name), value});
  }

  int32_t num_vars() const { return static_cast<int32_t>(roles_.size()); }
  const VarRole& role(int32_t var) const { return roles_.at(var - 1); }
  const std::vector<VarRole>& roles() const { return roles_; }
  const std::vector<ConstantRecord>& constants() const { return constants_; }

  bool operator==(const VarMap&) const = default;

 private:
  std::vector<VarRole> roles_;
  std::vector<ConstantRecord> constants_;
};

// Sidecar file next to a DIMACS file, so models coming back from an
// external solver can be decoded into features, logits and flips.
void save_varmap(const VarMap& map, const std::string& path);
VarMap load_varmap(const std::string& path);

}  // namespace satx
