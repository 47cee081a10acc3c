#pragma once

#include <string>

#include <json.hpp>

#include "causalmine/scm/types.hpp"

namespace causalmine::scm {

nlohmann::json to_json(const StructuralExpr& e);
StructuralExpr expr_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Scm& scm);
// Parses and validates. Throws ValidationError / nlohmann::json exceptions on
// malformed documents.
Scm scm_from_json(const nlohmann::json& j);

std::string emit(const Scm& scm);      // canonical text (sorted keys, 2-space indent)
Scm parse(const std::string& text);

// Canonical identity string for structural deduplication.
std::string canonical_key(const Scm& scm);

}  // namespace causalmine::scm
