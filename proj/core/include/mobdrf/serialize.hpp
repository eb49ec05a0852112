#pragma once
#include <string>

#include "mobdrf/mobtree.hpp"
#include "mobdrf/stack.hpp"

namespace mobdrf {

// Versioned JSON serialization. Doubles are written in shortest form that
// parses back to the identical bit pattern, so save/load round trips are
// exact and same-seed retrains produce byte-identical files.
std::string tree_to_json(const MobTree& tree);
MobTree tree_from_json(const std::string& text);

std::string bundle_to_json(const MobDrfModel& model);
MobDrfModel bundle_from_json(const std::string& text);

void save_bundle(const MobDrfModel& model, const std::string& path);
MobDrfModel load_bundle(const std::string& path);

// FNV-1a over the canonical schema description (names, roles, kinds);
// evaluate/predict refuse datasets whose schema hash disagrees.
std::string schema_hash(const Schema& schema);

} // namespace mobdrf
