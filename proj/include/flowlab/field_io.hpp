#pragma once

#include "flowlab/grid.hpp"

#include <json.hpp>

#include <string>

namespace flowlab {

/// FLOW1 field file: ASCII magic "FLOW1\n", one UTF-8 JSON header line
/// {"n":..,"length":..,"dtype":"f64","meta":{..}}, then n² row-major
/// little-endian 64-bit floats. Round trips are bit-exact.
struct LoadedField {
    RealField field;
    nlohmann::json meta; // arbitrary header metadata (time, physics parameters, regime tag, ...)
};

void write_field(const std::string& path, const RealField& f,
                 const nlohmann::json& meta = nlohmann::json::object());

LoadedField read_field(const std::string& path);

} // namespace flowlab
