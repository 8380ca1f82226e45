#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace exnexus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;  // NotConverged or TrackingLost

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Column documentation for every table plus the metadata JSON schema.
nlohmann::json schema_document();

}  // namespace exnexus::cli
