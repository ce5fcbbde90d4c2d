#pragma once

#include <stdexcept>
#include <string>

#include "cobot/params.hpp"

namespace cobot {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary checkpoint: magic "COBT1", little-endian u32 entry count, then per
// parameter: u32 name length, name bytes, u32 n1/n2/n3, f64 payload.
void save_checkpoint(const ParamStore& store, const std::string& path);

// Loads every blob in file order into the target store; parameters are
// matched by name and must already exist with the same shape.
void load_checkpoint(ParamStore& store, const std::string& path);

// Reads names and shapes without requiring a pre-built store.
std::vector<std::pair<std::string, Shape>> checkpoint_manifest(const std::string& path);

} // namespace cobot
