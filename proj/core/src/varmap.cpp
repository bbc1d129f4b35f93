// SPDX-License-Identifier: Apache-2.0

#include "satx/varmap.hpp"

#include <fstream>

#include <json.hpp>

#include "satx/errors.hpp"

namespace satx {

namespace {

using nlohmann::json;

// Compact per-variable codes keep the sidecar readable and small:
//   f:t:d:b   input feature bit      a:l:u:b  activation bit
//   o:c:b     output logit bit       p:t:d:b  flip indicator (b=-1 feature)
//   k         cardinality aux        x        tseitin aux
std::string role_code(const VarRole& r) {
  auto triple = [&](char tag) {
    return std::string(1, tag) + ":" + std::to_string(r.a) + ":" +
           std::to_string(r.b) + ":" + std::to_string(r.c);
  };
  switch (r.kind) {
    case VarKind::InputFeatureBit: return triple('f');
    case VarKind::ActivationBit: return triple('a');
    case VarKind::OutputLogitBit:
      return "o:" + std::to_string(r.a) + ":" + std::to_string(r.b);
    case VarKind::FlipIndicator: return triple('p');
    case VarKind::CardinalityAux: return "k";
    case VarKind::TseitinAux: return "x";
  }
  throw Error("unreachable role kind");
}

VarRole parse_code(const std::string& code) {
  VarRole r;
  if (code == "x") {
    r.kind = VarKind::TseitinAux;
    return r;
  }
  if (code == "k") {
    r.kind = VarKind::CardinalityAux;
    return r;
  }
  std::vector<int32_t> nums;
  std::size_t pos = code.find(':');
  if (pos != 1) throw SchemaError("bad varmap role code '" + code + "'");
  std::size_t start = 2;
  while (start <= code.size()) {
    std::size_t next = code.find(':', start);
    std::string part = code.substr(start, next == std::string::npos
                                              ? std::string::npos
                                              : next - start);
    try {
      nums.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw SchemaError("bad varmap role code '" + code + "'");
    }
    if (next == std::string::npos) break;
    start = next + 1;
  }
  switch (code[0]) {
    case 'f': r.kind = VarKind::InputFeatureBit; break;
    case 'a': r.kind = VarKind::ActivationBit; break;
    case 'o': r.kind = VarKind::OutputLogitBit; break;
    case 'p': r.kind = VarKind::FlipIndicator; break;
    default: throw SchemaError("bad varmap role code '" + code + "'");
  }
  std::size_t expected = r.kind == VarKind::OutputLogitBit ? 2 : 3;
  if (nums.size() != expected)
    throw SchemaError("bad varmap role code '" + code + "'");
  r.a = nums[0];
  r.b = nums[1];
  if (expected == 3) r.c = nums[2];
  return r;
}

}  // namespace

void save_varmap(const VarMap& map, const std::string& path) {
  json doc;
  doc["num_vars"] = map.num_vars();
  json vars = json::array();
  for (const auto& role : map.roles()) vars.push_back(role_code(role));
  doc["vars"] = vars;
  json consts = json::array();
  for (const auto& c : map.constants()) {
    consts.push_back({{"name", c.name},
                      {"mantissa", mantissa_to_string(c.value.mantissa)},
                      {"bits", c.value.format.total_bits},
                      {"frac", c.value.format.frac_bits}});
  }
  doc["constants"] = consts;
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << doc.dump(1) << '\n';
  if (!out.flush()) throw Error("write failed: " + path);
}

VarMap load_varmap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SchemaError("varmap parse error: " + std::string(e.what()));
  }
  VarMap map;
  try {
    for (const auto& code : doc.at("vars"))
      map.push(parse_code(code.get<std::string>()));
    for (const auto& c : doc.at("constants")) {
      FixedPointFormat fmt{c.at("bits").get<int>(), c.at("frac").get<int>()};
      map.record_constant(
          c.at("name").get<std::string>(),
          QuantizedValue{fmt, mantissa_from_string(
                                  c.at("mantissa").get<std::string>())});
    }
    if (doc.at("num_vars").get<int32_t>() != map.num_vars())
      throw SchemaError("varmap: num_vars disagrees with vars array");
  } catch (const json::exception& e) {
    throw SchemaError("varmap field error: " + std::string(e.what()));
  }
  return map;
}

}  // namespace satx
